#pragma once

// Propensity scores, X-Learner average treatment effect with cross-fitting,
// bootstrap uncertainty and covariate balance.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mxg/common.hpp"
#include "mxg/gbdt.hpp"
#include "mxg/logistic.hpp"

namespace mxg {

struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<std::size_t> counts;

    static Histogram make(double lo, double hi, int bins) {
        Histogram h;
        h.lo = lo;
        h.hi = hi;
        h.counts.assign(static_cast<std::size_t>(bins), 0);
        return h;
    }
    void add(double v) {
        const auto bins = static_cast<double>(counts.size());
        auto b = static_cast<long>(std::floor((v - lo) / (hi - lo) * bins));
        b = std::clamp(b, 0L, static_cast<long>(counts.size()) - 1);
        ++counts[static_cast<std::size_t>(b)];
    }
    std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
};

namespace detail {
inline void count_groups(std::span<const int> t, std::size_t& n1, std::size_t& n0) {
    n1 = 0;
    n0 = 0;
    for (int v : t) {
        if (v == 1) {
            ++n1;
        } else if (v == 0) {
            ++n0;
        } else {
            throw DataError("treatment indicators must be 0 or 1");
        }
    }
}
inline void require_both_groups(std::span<const int> t, const char* who) {
    std::size_t n1 = 0;
    std::size_t n0 = 0;
    count_groups(t, n1, n0);
    if (n1 == 0 || n0 == 0) {
        throw DataError(std::string(who) + ": need both treated and control units (treated = " + std::to_string(n1) + ", control = " + std::to_string(n0) + ")");
    }
}
}  // namespace detail

struct PropensityOptions {
    double clip_low = 0.01;
    double clip_high = 0.99;
    double l2 = 1e-4;  ///< ridge on standardized slopes
    int max_iterations = 100;
    int histogram_bins = 20;
};

struct PropensityResult {
    std::vector<double> propensity;  ///< clipped
    bool separation = false;         ///< linear predictor separates the groups completely
    std::size_t n_clipped = 0;
    LogisticFit fit;  ///< on standardized covariates
    Histogram treated;
    Histogram control;
};

/// Logistic regression of treatment on covariates (columns standardized
/// internally; constant columns contribute nothing).
inline PropensityResult estimate_propensity(const Eigen::MatrixXd& X, std::span<const int> treatment, const PropensityOptions& opt = {}) {
    if (static_cast<Eigen::Index>(treatment.size()) != X.rows()) {
        throw ConfigError("estimate_propensity: treatment length does not match covariate rows");
    }
    if (!(opt.clip_low > 0.0 && opt.clip_low < opt.clip_high && opt.clip_high < 1.0)) {
        throw ConfigError("estimate_propensity: need 0 < clip_low < clip_high < 1");
    }
    detail::require_both_groups(treatment, "estimate_propensity");
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd Z = X;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double mu = X.col(j).mean();
        const double sd = std::sqrt((X.col(j).array() - mu).square().sum() / static_cast<double>(n));
        if (sd > 0.0) {
            Z.col(j) = ((X.col(j).array() - mu) / sd).matrix();
        } else {
            Z.col(j).setZero();
        }
    }
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = treatment[static_cast<std::size_t>(i)];
    }
    LogisticOptions lo;
    lo.l2 = opt.l2;
    lo.max_iterations = opt.max_iterations;
    PropensityResult r;
    r.fit = fit_logistic_irls(Z, y, lo);
    const Eigen::VectorXd eta = (Z * r.fit.coefficients).array() + r.fit.intercept;

    double max0 = -std::numeric_limits<double>::infinity();
    double min1 = std::numeric_limits<double>::infinity();
    double max1 = -std::numeric_limits<double>::infinity();
    double min0 = std::numeric_limits<double>::infinity();
    r.propensity.resize(static_cast<std::size_t>(n));
    r.treated = Histogram::make(0.0, 1.0, opt.histogram_bins);
    r.control = Histogram::make(0.0, 1.0, opt.histogram_bins);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = sigmoid(eta(i));
        const double c = std::clamp(p, opt.clip_low, opt.clip_high);
        if (c != p) {
            ++r.n_clipped;
        }
        r.propensity[static_cast<std::size_t>(i)] = c;
        if (treatment[static_cast<std::size_t>(i)] == 1) {
            min1 = std::min(min1, eta(i));
            max1 = std::max(max1, eta(i));
            r.treated.add(c);
        } else {
            min0 = std::min(min0, eta(i));
            max0 = std::max(max0, eta(i));
            r.control.add(c);
        }
    }
    r.separation = max0 < min1 || max1 < min0;
    return r;
}

struct XLearnerConfig {
    GbdtConfig base = [] {
        GbdtConfig c;
        c.max_depth = 3;
        c.n_rounds = 100;
        c.learning_rate = 0.1;
        c.row_subsample = 1.0;
        c.early_stop_rounds = 0;
        c.class_weighting = ClassWeighting::none;
        c.objective = Objective::squared_error;
        return c;
    }();
    int folds = 5;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::size_t small_group_warning = 50;
    bool fit_full = true;  // false leaves ate_full and tau_full empty (NaN)
};

/// Per-unit pieces of one X-Learner fit, all evaluated out of fold when
/// produced by cross-fitting.
struct XLearnerUnits {
    std::vector<double> tau;
    std::vector<double> mu1;
    std::vector<double> mu0;
};

namespace detail {

inline GbdtModel fit_regressor(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows, const std::vector<double>& target,
                               const GbdtConfig& base, std::uint64_t seed) {
    LabeledMatrix tr;
    tr.x.data.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
    tr.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        tr.x.names.push_back("x" + std::to_string(c));
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        tr.x.data.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
        tr.y(static_cast<Eigen::Index>(i)) = target[i];
    }
    GbdtConfig cfg = base;
    cfg.seed = seed;
    cfg.early_stop_rounds = 0;
    cfg.objective = Objective::squared_error;
    return fit_gbdt(tr, LabeledMatrix{}, cfg);
}

inline double predict_row(const GbdtModel& m, const Eigen::MatrixXd& X, Eigen::Index i) {
    return m.margin(X.row(i));
}

/// Fits the four X-Learner models on `fit_rows` and evaluates them on `eval_rows`.
inline void x_learner_fold(const Eigen::MatrixXd& X, std::span<const int> t, std::span<const double> y, std::span<const double> g,
                           const std::vector<Eigen::Index>& fit_rows, const std::vector<Eigen::Index>& eval_rows, const GbdtConfig& base,
                           std::uint64_t seed, XLearnerUnits& out) {
    std::vector<Eigen::Index> r1;
    std::vector<Eigen::Index> r0;
    std::vector<double> y1;
    std::vector<double> y0;
    for (Eigen::Index i : fit_rows) {
        if (t[static_cast<std::size_t>(i)] == 1) {
            r1.push_back(i);
            y1.push_back(y[static_cast<std::size_t>(i)]);
        } else {
            r0.push_back(i);
            y0.push_back(y[static_cast<std::size_t>(i)]);
        }
    }
    if (r1.empty() || r0.empty()) {
        throw DataError("x_learner: a training fold lacks treated or control units");
    }
    // Seeds follow the group a model is fit on, so relabeling groups reuses them.
    const auto mu1 = fit_regressor(X, r1, y1, base, derive_seed(seed, 1));
    const auto mu0 = fit_regressor(X, r0, y0, base, derive_seed(seed, 1));
    std::vector<double> d1(r1.size());
    std::vector<double> d0(r0.size());
    for (std::size_t k = 0; k < r1.size(); ++k) {
        d1[k] = y1[k] - predict_row(mu0, X, r1[k]);
    }
    for (std::size_t k = 0; k < r0.size(); ++k) {
        d0[k] = predict_row(mu1, X, r0[k]) - y0[k];
    }
    const auto tau1 = fit_regressor(X, r1, d1, base, derive_seed(seed, 2));
    const auto tau0 = fit_regressor(X, r0, d0, base, derive_seed(seed, 2));
    for (Eigen::Index i : eval_rows) {
        const auto u = static_cast<std::size_t>(i);
        const double gi = g[u];
        out.tau[u] = gi * predict_row(tau0, X, i) + (1.0 - gi) * predict_row(tau1, X, i);
        out.mu1[u] = predict_row(mu1, X, i);
        out.mu0[u] = predict_row(mu0, X, i);
    }
}

}  // namespace detail

struct XLearnerResult {
    double ate_cv = 0.0;    ///< mean out-of-fold per-unit effect
    double ate_full = 0.0;  ///< mean in-sample per-unit effect from one all-data fit
    XLearnerUnits cross_fit;
    std::vector<double> tau_full;
    std::vector<std::string> warnings;
    std::size_t n_treated = 0;
    std::size_t n_control = 0;
};

/// X-Learner with gradient-boosted squared-loss base learners. `propensity`
/// weights the two effect models: tau = g*tau0 + (1-g)*tau1.
inline XLearnerResult x_learner_ate(const Eigen::MatrixXd& X, std::span<const int> treatment, std::span<const double> outcome,
                                    std::span<const double> propensity, const XLearnerConfig& cfg = {}) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (treatment.size() != n || outcome.size() != n || propensity.size() != n) {
        throw ConfigError("x_learner_ate: covariates, treatment, outcome and propensity must have equal length");
    }
    if (cfg.folds < 2) {
        throw ConfigError("x_learner_ate: folds must be >= 2");
    }
    XLearnerResult res;
    detail::count_groups(treatment, res.n_treated, res.n_control);
    detail::require_both_groups(treatment, "x_learner_ate");
    double min1 = 1.0;
    double max1 = 0.0;
    double min0 = 1.0;
    double max0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = propensity[i];
        if (!(g > 0.0 && g < 1.0)) {
            throw DataError("x_learner_ate: propensities must lie in (0, 1)");
        }
        if (treatment[i] == 1) {
            min1 = std::min(min1, g);
            max1 = std::max(max1, g);
        } else {
            min0 = std::min(min0, g);
            max0 = std::max(max0, g);
        }
    }
    if (max0 < min1 || max1 < min0) {
        throw DataError("x_learner_ate: treated and control propensity supports do not overlap");
    }
    if (res.n_treated < cfg.small_group_warning) {
        res.warnings.push_back("treated group is small (" + std::to_string(res.n_treated) + " units)");
    }
    if (res.n_control < cfg.small_group_warning) {
        res.warnings.push_back("control group is small (" + std::to_string(res.n_control) + " units)");
    }

    // Fold labels from a seeded permutation, independent of treatment.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(cfg.seed, 0xF01D));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold(n);
    for (std::size_t k = 0; k < n; ++k) {
        fold[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(cfg.folds));
    }

    res.cross_fit.tau.assign(n, 0.0);
    res.cross_fit.mu1.assign(n, 0.0);
    res.cross_fit.mu0.assign(n, 0.0);
    XLearnerUnits full;
    full.tau.assign(n, 0.0);
    full.mu1.assign(n, 0.0);
    full.mu0.assign(n, 0.0);
    // Task f < folds is a cross-fit fold; task == folds is the all-data fit.
    // Every task writes disjoint slots.
    const std::size_t tasks = static_cast<std::size_t>(cfg.folds) + (cfg.fit_full ? 1 : 0);
    parallel_for(tasks, cfg.threads, [&](std::size_t f) {
        std::vector<Eigen::Index> fit_rows;
        std::vector<Eigen::Index> eval_rows;
        for (std::size_t i = 0; i < n; ++i) {
            const bool held = static_cast<std::size_t>(fold[i]) == f;
            if (f == static_cast<std::size_t>(cfg.folds) || !held) {
                fit_rows.push_back(static_cast<Eigen::Index>(i));
            }
            if (f == static_cast<std::size_t>(cfg.folds) || held) {
                eval_rows.push_back(static_cast<Eigen::Index>(i));
            }
        }
        auto& target = f == static_cast<std::size_t>(cfg.folds) ? full : res.cross_fit;
        detail::x_learner_fold(X, treatment, outcome, propensity, fit_rows, eval_rows, cfg.base, derive_seed(cfg.seed, 100 + f), target);
    });
    res.ate_cv = mean(res.cross_fit.tau);
    if (cfg.fit_full) {
        res.tau_full = std::move(full.tau);
        res.ate_full = mean(res.tau_full);
    } else {
        res.ate_full = std::numeric_limits<double>::quiet_NaN();
    }
    return res;
}

/// Doubly robust (AIPW) per-unit scores from the out-of-fold stage-one
/// outcome models: mu1 - mu0 + T(Y - mu1)/g - (1-T)(Y - mu0)/(1-g).
inline std::vector<double> dr_scores(const XLearnerUnits& u, std::span<const int> treatment, std::span<const double> outcome,
                                     std::span<const double> propensity) {
    std::vector<double> phi(u.tau.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double g = propensity[i];
        phi[i] = u.mu1[i] - u.mu0[i] + (treatment[i] == 1 ? (outcome[i] - u.mu1[i]) / g : -(outcome[i] - u.mu0[i]) / (1.0 - g));
    }
    return phi;
}

struct BootstrapResult {
    double estimate = 0.0;  ///< mean of the bootstrap replicates
    double ci_low = 0.0;
    double ci_high = 0.0;
    double sd = 0.0;
    double median = 0.0;
    std::optional<double> p_value;  ///< absent when the replicates have zero variance
    bool zero_variance = false;
    std::vector<double> replicates;
};

/// Nonparametric bootstrap of `estimator` over n units. Each resample draws
/// from its own seed-derived stream, so the result does not depend on
/// `threads`. Percentile CI; two-sided p from z = mean / sd.
inline BootstrapResult bootstrap_ci(const std::function<double(std::span<const std::size_t>)>& estimator, std::size_t n,
                                    int n_resamples = 1000, double level = 0.95, std::uint64_t seed = 0, unsigned threads = 1) {
    if (n_resamples < 100) {
        throw ConfigError("bootstrap_ci: n_resamples must be >= 100");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw ConfigError("bootstrap_ci: level must be in (0, 1)");
    }
    if (n == 0) {
        throw DataError("bootstrap_ci: no units");
    }
    BootstrapResult r;
    r.replicates.assign(static_cast<std::size_t>(n_resamples), 0.0);
    parallel_for(static_cast<std::size_t>(n_resamples), threads, [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> idx(n);
        for (auto& i : idx) {
            i = pick(rng);
        }
        r.replicates[b] = estimator(idx);
    });
    r.estimate = mean(r.replicates);
    double ss = 0.0;
    for (double v : r.replicates) {
        ss += (v - r.estimate) * (v - r.estimate);
    }
    r.sd = std::sqrt(ss / static_cast<double>(n_resamples - 1));
    const double alpha = 1.0 - level;
    r.ci_low = nearest_rank(r.replicates, alpha / 2.0);
    r.ci_high = nearest_rank(r.replicates, 1.0 - alpha / 2.0);
    r.median = nearest_rank(r.replicates, 0.5);
    const auto [mn, mx] = std::minmax_element(r.replicates.begin(), r.replicates.end());
    if (*mn == *mx) {
        r.zero_variance = true;
        r.sd = 0.0;
        r.estimate = *mn;
        return r;
    }
    const double z = r.estimate / r.sd;
    r.p_value = std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), std::numeric_limits<double>::denorm_min(), 1.0);
    return r;
}

/// Bootstrap of the mean of per-unit scores.
inline BootstrapResult bootstrap_mean(std::span<const double> scores, int n_resamples = 1000, double level = 0.95, std::uint64_t seed = 0,
                                      unsigned threads = 1) {
    return bootstrap_ci(
        [&](std::span<const std::size_t> idx) {
            double s = 0.0;
            for (std::size_t i : idx) {
                s += scores[i];
            }
            return s / static_cast<double>(idx.size());
        },
        scores.size(), n_resamples, level, seed, threads);
}

struct BalanceRow {
    std::string covariate;
    double smd_raw = 0.0;
    double smd_weighted = 0.0;
    bool undefined = false;  ///< pooled variance is zero
};

namespace detail {
inline void weighted_moments(const Eigen::VectorXd& x, const std::vector<double>& w, const std::vector<std::size_t>& rows, double& m, double& v) {
    double sw = 0.0;
    double s = 0.0;
    for (std::size_t i : rows) {
        sw += w[i];
        s += w[i] * x(static_cast<Eigen::Index>(i));
    }
    m = s / sw;
    double ss = 0.0;
    for (std::size_t i : rows) {
        const double d = x(static_cast<Eigen::Index>(i)) - m;
        ss += w[i] * d * d;
    }
    v = ss / sw;
}
}  // namespace detail

/// Standardized mean difference per covariate, raw and with inverse-propensity
/// weights (1/g treated, 1/(1-g) control). Denominator: sqrt of the mean of
/// the two group variances.
inline std::vector<BalanceRow> covariate_balance(const Eigen::MatrixXd& X, const std::vector<std::string>& names, std::span<const int> treatment,
                                                 std::span<const double> propensity) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (treatment.size() != n || propensity.size() != n || names.size() != static_cast<std::size_t>(X.cols())) {
        throw ConfigError("covariate_balance: input sizes disagree");
    }
    detail::require_both_groups(treatment, "covariate_balance");
    std::vector<std::size_t> g1;
    std::vector<std::size_t> g0;
    for (std::size_t i = 0; i < n; ++i) {
        (treatment[i] == 1 ? g1 : g0).push_back(i);
    }
    const std::vector<double> ones(n, 1.0);
    std::vector<double> ipw(n);
    for (std::size_t i = 0; i < n; ++i) {
        ipw[i] = treatment[i] == 1 ? 1.0 / propensity[i] : 1.0 / (1.0 - propensity[i]);
    }
    std::vector<BalanceRow> out;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const Eigen::VectorXd col = X.col(j);
        BalanceRow row;
        row.covariate = names[static_cast<std::size_t>(j)];
        double m1 = 0;
        double v1 = 0;
        double m0 = 0;
        double v0 = 0;
        detail::weighted_moments(col, ones, g1, m1, v1);
        detail::weighted_moments(col, ones, g0, m0, v0);
        const double pooled = std::sqrt(0.5 * (v1 + v0));
        if (!(pooled > 0.0)) {
            row.undefined = true;
            row.smd_raw = std::numeric_limits<double>::quiet_NaN();
            row.smd_weighted = std::numeric_limits<double>::quiet_NaN();
            out.push_back(row);
            continue;
        }
        row.smd_raw = (m1 - m0) / pooled;
        double wm1 = 0;
        double wv1 = 0;
        double wm0 = 0;
        double wv0 = 0;
        detail::weighted_moments(col, ipw, g1, wm1, wv1);
        detail::weighted_moments(col, ipw, g0, wm0, wv0);
        // Raw pooled SD keeps the two columns on one scale.
        row.smd_weighted = (wm1 - wm0) / pooled;
        out.push_back(row);
    }
    return out;
}

/// Reference values of the results table (not reproducible here).
struct ReferenceResults {
    static constexpr double ate_cv = 0.12576;
    static constexpr double ate_bootstrap = 0.10688;
    static constexpr double ci_low = 0.05002;
    static constexpr double ci_high = 0.17436;
    static constexpr double p_value = 1.42883e-52;
};

struct CausalReport {
    std::string outcome = "composite_s";
    double ate_cv = 0.0;
    double ate_full = 0.0;
    double ate_bootstrap = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::optional<double> p_value;
    bool zero_variance = false;
    double naive_difference = 0.0;
    std::size_t n_treated = 0;
    std::size_t n_control = 0;
    bool propensity_separation = false;
    Histogram propensity_treated;
    Histogram propensity_control;
    std::vector<BalanceRow> balance;
    std::vector<double> per_unit_effects;
    std::vector<std::string> warnings;
    std::vector<std::string> covariates;
};

inline double naive_difference(std::span<const int> treatment, std::span<const double> outcome) {
    double s1 = 0;
    double s0 = 0;
    std::size_t n1 = 0;
    std::size_t n0 = 0;
    for (std::size_t i = 0; i < treatment.size(); ++i) {
        if (treatment[i] == 1) {
            s1 += outcome[i];
            ++n1;
        } else {
            s0 += outcome[i];
            ++n0;
        }
    }
    return s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0);
}

struct CausalOptions {
    XLearnerConfig xlearner;
    PropensityOptions propensity;
    int n_resamples = 1000;
    double level = 0.95;
};

/// Full analysis: propensity, X-Learner (cross-fitted and full), bootstrap of
/// the cross-fitted doubly robust scores, balance.
inline CausalReport run_causal(const Eigen::MatrixXd& X, const std::vector<std::string>& names, std::span<const int> treatment,
                               std::span<const double> outcome, const CausalOptions& opt = {}) {
    CausalReport rep;
    rep.covariates = names;
    const auto ps = estimate_propensity(X, treatment, opt.propensity);
    rep.propensity_separation = ps.separation;
    rep.propensity_treated = ps.treated;
    rep.propensity_control = ps.control;
    if (ps.separation) {
        rep.warnings.push_back("treatment is perfectly separable from the covariates; propensities are clipped");
    }
    const auto xl = x_learner_ate(X, treatment, outcome, ps.propensity, opt.xlearner);
    rep.ate_cv = xl.ate_cv;
    rep.ate_full = xl.ate_full;
    rep.n_treated = xl.n_treated;
    rep.n_control = xl.n_control;
    rep.per_unit_effects = xl.cross_fit.tau;
    rep.warnings.insert(rep.warnings.end(), xl.warnings.begin(), xl.warnings.end());
    const auto phi = dr_scores(xl.cross_fit, treatment, outcome, ps.propensity);
    const auto bs = bootstrap_mean(phi, opt.n_resamples, opt.level, derive_seed(opt.xlearner.seed, 0xB007), opt.xlearner.threads);
    rep.ate_bootstrap = bs.estimate;
    rep.ci_low = bs.ci_low;
    rep.ci_high = bs.ci_high;
    rep.p_value = bs.p_value;
    rep.zero_variance = bs.zero_variance;
    rep.naive_difference = naive_difference(treatment, outcome);
    rep.balance = covariate_balance(X, names, treatment, ps.propensity);
    return rep;
}

inline nlohmann::ordered_json to_json(const Histogram& h) {
    return {{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}};
}

/// The five rows of the results table, in order.
inline nlohmann::ordered_json results_table_json(const CausalReport& r) {
    auto pv = r.p_value ? nlohmann::ordered_json(*r.p_value) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json t = nlohmann::ordered_json::array();
    t.push_back({{"metric", "Momentum Score ATE (CV)"}, {"value", r.ate_cv}});
    t.push_back({{"metric", "Momentum Score ATE (Bootstrap)"}, {"value", r.ate_bootstrap}});
    t.push_back({{"metric", "95% CI Lower"}, {"value", r.ci_low}});
    t.push_back({{"metric", "95% CI Upper"}, {"value", r.ci_high}});
    t.push_back({{"metric", "Score p-value"}, {"value", pv}});
    return t;
}

inline nlohmann::ordered_json to_json(const CausalReport& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
    nlohmann::ordered_json j;
    j["ate_cv"] = r.ate_cv;
    j["ate_bootstrap"] = r.ate_bootstrap;
    j["ci_low"] = r.ci_low;
    j["ci_high"] = r.ci_high;
    j["p_value"] = r.p_value ? nlohmann::ordered_json(*r.p_value) : nlohmann::ordered_json(nullptr);
    j["table"] = results_table_json(r);
    j["outcome"] = r.outcome;
    j["ate_full"] = num(r.ate_full);
    j["zero_variance"] = r.zero_variance;
    j["naive_difference"] = r.naive_difference;
    j["n_treated"] = r.n_treated;
    j["n_control"] = r.n_control;
    j["covariates"] = r.covariates;
    j["propensity_separation"] = r.propensity_separation;
    j["propensity_histograms"] = {{"treated", to_json(r.propensity_treated)}, {"control", to_json(r.propensity_control)}};
    auto& bal = j["balance"] = nlohmann::ordered_json::array();
    for (const auto& b : r.balance) {
        bal.push_back({{"covariate", b.covariate}, {"smd_raw", num(b.smd_raw)}, {"smd_weighted", num(b.smd_weighted)}, {"undefined", b.undefined}});
    }
    j["per_unit_effects"] = r.per_unit_effects;
    j["warnings"] = r.warnings;
    j["reference"] = {{"ate_cv", ReferenceResults::ate_cv},
                      {"ate_bootstrap", ReferenceResults::ate_bootstrap},
                      {"ci_low", ReferenceResults::ci_low},
                      {"ci_high", ReferenceResults::ci_high},
                      {"p_value", ReferenceResults::p_value}};
    return j;
}

/// Binned CSV of a set of histograms sharing edges: bin_lo,bin_hi,<name>...
inline std::string histograms_csv(const std::vector<std::pair<std::string, Histogram>>& hs) {
    if (hs.empty()) {
        return {};
    }
    std::string s = "bin_lo,bin_hi";
    for (const auto& [name, _] : hs) {
        s += "," + name;
    }
    s += '\n';
    const auto& h0 = hs.front().second;
    const double w = (h0.hi - h0.lo) / static_cast<double>(h0.counts.size());
    char buf[64];
    for (std::size_t b = 0; b < h0.counts.size(); ++b) {
        std::snprintf(buf, sizeof buf, "%.6g,%.6g", h0.lo + b * w, h0.lo + (b + 1) * w);
        s += buf;
        for (const auto& [_, h] : hs) {
            s += "," + std::to_string(h.counts[b]);
        }
        s += '\n';
    }
    return s;
}

/// Histogram of per-unit effects over their observed range.
inline Histogram effect_histogram(std::span<const double> effects, int bins = 40) {
    if (effects.empty()) {
        return Histogram::make(0.0, 1.0, bins);
    }
    auto [mn, mx] = std::minmax_element(effects.begin(), effects.end());
    double lo = *mn;
    double hi = *mx;
    if (hi <= lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    auto h = Histogram::make(lo, hi, bins);
    for (double v : effects) {
        h.add(v);
    }
    return h;
}

}  // namespace mxg
