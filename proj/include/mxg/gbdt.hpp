#pragma once

// Gradient-boosted regression trees with second-order (Newton) leaves.
//
// Splits use exact greedy search over the sorted unique values of each
// feature; a split sends rows with x < threshold left, where threshold is the
// midpoint of two adjacent distinct values. Equal gains (up to rounding)
// resolve to the lowest feature id, then the lowest threshold.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mxg/common.hpp"

namespace mxg {

/// Column-named dense feature matrix (rows = samples).
struct FeatureMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd data;

    Eigen::Index rows() const { return data.rows(); }
    Eigen::Index cols() const { return data.cols(); }
};

enum class Objective { binary_logistic, squared_error };
enum class ClassWeighting { none, inverse_frequency };

struct GbdtConfig {
    int max_depth = 6;
    int n_rounds = 200;
    double learning_rate = 0.05;
    double row_subsample = 0.8;
    ClassWeighting class_weighting = ClassWeighting::inverse_frequency;
    int early_stop_rounds = 25;  ///< 0 disables early stopping
    double min_leaf_weight = 1.0;
    double l2_leaf = 1.0;
    double min_split_gain = 0.0;
    std::uint64_t seed = 0;
    Objective objective = Objective::binary_logistic;

    void validate() const {
        if (max_depth < 0) {
            throw ConfigError("gbdt: max_depth must be >= 0");
        }
        if (n_rounds < 0) {
            throw ConfigError("gbdt: n_rounds must be >= 0");
        }
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
            throw ConfigError("gbdt: learning_rate must be in (0, 1]");
        }
        if (!(row_subsample > 0.0 && row_subsample <= 1.0)) {
            throw ConfigError("gbdt: row_subsample must be in (0, 1]");
        }
        if (early_stop_rounds < 0) {
            throw ConfigError("gbdt: early_stop_rounds must be >= 0");
        }
        if (min_leaf_weight < 0.0 || l2_leaf < 0.0 || min_split_gain < 0.0) {
            throw ConfigError("gbdt: min_leaf_weight, l2_leaf and min_split_gain must be >= 0");
        }
    }
};

struct TreeNode {
    int feature = -1;  ///< -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  ///< leaf output before shrinkage
    double gain = 0.0;
    double cover = 0.0;  ///< hessian sum of training rows reaching the node

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  ///< nodes[0] is the root

    template <class Row>
    double predict(const Row& row) const {
        int n = 0;
        while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
            const auto& nd = nodes[static_cast<std::size_t>(n)];
            n = row(nd.feature) < nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(n)].value;
    }

    int depth() const { return depth_of(0); }

private:
    int depth_of(int n) const {
        const auto& nd = nodes[static_cast<std::size_t>(n)];
        if (nd.is_leaf()) {
            return 0;
        }
        return 1 + std::max(depth_of(nd.left), depth_of(nd.right));
    }
};

struct GbdtModel {
    double base_score = 0.0;  ///< margin before any tree (log-odds for the logistic objective)
    double learning_rate = 0.05;
    Objective objective = Objective::binary_logistic;
    std::vector<RegressionTree> trees;
    std::vector<std::string> feature_names;
    int best_round = 0;  ///< number of trees kept after early stopping
    std::vector<double> train_loss;  ///< weighted training loss after each round (index 0 = base score only)
    std::vector<double> valid_loss;

    template <class Row>
    double margin(const Row& row) const {
        double m = base_score;
        for (const auto& t : trees) {
            m += learning_rate * t.predict(row);
        }
        return m;
    }
};

struct SplitCandidate {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
    double grad_left = 0.0;
    double hess_left = 0.0;

    bool valid() const { return feature >= 0; }
};

/// Newton split gain: 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)].
inline double split_gain(double gl, double hl, double gr, double hr, double l2) {
    const double g = gl + gr;
    const double h = hl + hr;
    return 0.5 * (gl * gl / (hl + l2) + gr * gr / (hr + l2) - g * g / (h + l2));
}

inline double leaf_value(double g, double h, double l2) { return -g / (h + l2); }

/// Threshold between two adjacent distinct sorted values a < b such that
/// a < threshold <= b.
inline double split_threshold(double a, double b) {
    const double t = a + (b - a) * 0.5;
    return t > a ? t : b;
}

namespace detail {

inline double class_weight_positive(const Eigen::VectorXd& y) {
    const double n = static_cast<double>(y.size());
    const double pos = y.sum();
    return n / (2.0 * pos);
}

inline double class_weight_negative(const Eigen::VectorXd& y) {
    const double n = static_cast<double>(y.size());
    const double pos = y.sum();
    return n / (2.0 * (n - pos));
}

inline double pointwise_loss(Objective obj, double margin, double y) {
    if (obj == Objective::binary_logistic) {
        return softplus(margin) - y * margin;
    }
    const double d = margin - y;
    return 0.5 * d * d;
}

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& X, const std::vector<std::vector<int>>& sorted, const GbdtConfig& cfg)
        : X_(X), sorted_(sorted), cfg_(cfg) {
        sorted_vals_.resize(sorted.size());
        for (std::size_t f = 0; f < sorted.size(); ++f) {
            sorted_vals_[f].reserve(sorted[f].size());
            for (int r : sorted[f]) {
                sorted_vals_[f].push_back(X(r, static_cast<Eigen::Index>(f)));
            }
        }
    }

    RegressionTree build(const std::vector<double>& g, const std::vector<double>& h, const std::vector<char>& in_sample) {
        const auto n = static_cast<std::size_t>(X_.rows());
        const int p = static_cast<int>(X_.cols());
        node_of_.assign(n, -1);
        RegressionTree tree;
        TreeNode root;
        double G = 0.0;
        double H = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (in_sample[i]) {
                node_of_[i] = 0;
                G += g[i];
                H += h[i];
            }
        }
        root.cover = H;
        root.value = leaf_value(G, H, cfg_.l2_leaf);
        tree.nodes.push_back(root);
        std::vector<double> node_g{G};
        std::vector<double> node_h{H};

        std::vector<int> frontier{0};
        for (int depth = 0; depth < cfg_.max_depth && !frontier.empty(); ++depth) {
            // slot[node] -> index in frontier arrays
            std::vector<int> slot(tree.nodes.size(), -1);
            for (std::size_t k = 0; k < frontier.size(); ++k) {
                slot[static_cast<std::size_t>(frontier[k])] = static_cast<int>(k);
            }
            const std::size_t m = frontier.size();
            std::vector<SplitCandidate> best(m);
            std::vector<double> gl(m);
            std::vector<double> hl(m);
            std::vector<double> last(m);
            std::vector<char> seen(m);
            std::vector<double> slot_g(m);
            std::vector<double> slot_h(m);
            std::vector<double> slot_parent(m);
            for (std::size_t k = 0; k < m; ++k) {
                slot_g[k] = node_g[static_cast<std::size_t>(frontier[k])];
                slot_h[k] = node_h[static_cast<std::size_t>(frontier[k])];
                slot_parent[k] = slot_g[k] * slot_g[k] / (slot_h[k] + cfg_.l2_leaf);
            }
            row_slot_.assign(n, -1);
            for (std::size_t i = 0; i < n; ++i) {
                const int nd = node_of_[i];
                if (nd >= 0) {
                    row_slot_[i] = slot[static_cast<std::size_t>(nd)];
                }
            }
            for (int f = 0; f < p; ++f) {
                std::fill(gl.begin(), gl.end(), 0.0);
                std::fill(hl.begin(), hl.end(), 0.0);
                std::fill(seen.begin(), seen.end(), 0);
                const auto& idx = sorted_[static_cast<std::size_t>(f)];
                const auto& vals = sorted_vals_[static_cast<std::size_t>(f)];
                for (std::size_t q = 0; q < idx.size(); ++q) {
                    const int r = idx[q];
                    const int s = row_slot_[static_cast<std::size_t>(r)];
                    if (s < 0) {
                        continue;
                    }
                    const auto k = static_cast<std::size_t>(s);
                    const double v = vals[q];
                    if (seen[k] && v > last[k]) {
                        consider(best[k], f, last[k], v, gl[k], hl[k], slot_g[k], slot_h[k], slot_parent[k]);
                    }
                    gl[k] += g[static_cast<std::size_t>(r)];
                    hl[k] += h[static_cast<std::size_t>(r)];
                    last[k] = v;
                    seen[k] = 1;
                }
            }
            std::vector<int> next;
            for (std::size_t k = 0; k < m; ++k) {
                const int nd = frontier[k];
                const auto& b = best[k];
                if (!b.valid()) {
                    continue;
                }
                const double gL = b.grad_left;
                const double hL = b.hess_left;
                const double gR = node_g[static_cast<std::size_t>(nd)] - gL;
                const double hR = node_h[static_cast<std::size_t>(nd)] - hL;
                TreeNode left;
                left.cover = hL;
                left.value = leaf_value(gL, hL, cfg_.l2_leaf);
                TreeNode right;
                right.cover = hR;
                right.value = leaf_value(gR, hR, cfg_.l2_leaf);
                const int li = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back(left);
                tree.nodes.push_back(right);
                node_g.push_back(gL);
                node_h.push_back(hL);
                node_g.push_back(gR);
                node_h.push_back(hR);
                auto& parent = tree.nodes[static_cast<std::size_t>(nd)];
                parent.feature = b.feature;
                parent.threshold = b.threshold;
                parent.gain = b.gain;
                parent.left = li;
                parent.right = li + 1;
                next.push_back(li);
                next.push_back(li + 1);
            }
            // Route rows of split nodes to their children.
            for (std::size_t i = 0; i < n; ++i) {
                const int nd = node_of_[i];
                if (nd < 0) {
                    continue;
                }
                const auto& t = tree.nodes[static_cast<std::size_t>(nd)];
                if (t.is_leaf()) {
                    node_of_[i] = -1;  // finished; no longer scanned
                    continue;
                }
                node_of_[i] = X_(static_cast<Eigen::Index>(i), t.feature) < t.threshold ? t.left : t.right;
            }
            frontier = std::move(next);
        }
        return tree;
    }

private:
    void consider(SplitCandidate& best, int f, double a, double b, double gl, double hl, double G, double H, double parent) const {
        const double hr = H - hl;
        if (hl < cfg_.min_leaf_weight || hr < cfg_.min_leaf_weight) {
            return;
        }
        const double l2 = cfg_.l2_leaf;
        const double gr = G - gl;
        const double dl = hl + l2;
        const double dr = hr + l2;
        const double gain = 0.5 * ((gl * gl * dr + gr * gr * dl) / (dl * dr) - parent);
        if (!(gain > cfg_.min_split_gain) || !(gain > 0.0)) {
            return;
        }
        if (best.valid()) {
            if (!(gain > best.gain)) {
                return;
            }
            // gains within rounding of each other count as equal
            const double slack = 1e-10 * (gl * gl / dl + gr * gr / dr + parent);
            if (!(gain > best.gain + slack)) {
                return;
            }
        }
        {
            best.feature = f;
            best.threshold = split_threshold(a, b);
            best.gain = gain;
            best.grad_left = gl;
            best.hess_left = hl;
        }
    }

    const Eigen::MatrixXd& X_;
    const std::vector<std::vector<int>>& sorted_;
    std::vector<std::vector<double>> sorted_vals_;
    const GbdtConfig& cfg_;
    std::vector<int> node_of_;
    std::vector<int> row_slot_;
};

}  // namespace detail

/// Per-row training weights: inverse class frequency (each class carries half
/// the total weight) for the logistic objective, 1 otherwise.
inline std::vector<double> class_weights(const Eigen::VectorXd& y, const GbdtConfig& cfg) {
    std::vector<double> w(static_cast<std::size_t>(y.size()), 1.0);
    if (cfg.objective != Objective::binary_logistic || cfg.class_weighting == ClassWeighting::none) {
        return w;
    }
    const double wp = detail::class_weight_positive(y);
    const double wn = detail::class_weight_negative(y);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        w[static_cast<std::size_t>(i)] = y(i) > 0.5 ? wp : wn;
    }
    return w;
}

struct LabeledMatrix {
    FeatureMatrix x;
    Eigen::VectorXd y;
};

/// Fits a boosted ensemble. Early stopping monitors the weighted validation
/// loss (weights derived from the training class balance) and keeps the trees
/// up to the best round.
inline GbdtModel fit_gbdt(const LabeledMatrix& train, const LabeledMatrix& valid, const GbdtConfig& cfg) {
    cfg.validate();
    const Eigen::MatrixXd& X = train.x.data;
    const Eigen::VectorXd& y = train.y;
    const auto n = static_cast<std::size_t>(X.rows());
    const int p = static_cast<int>(X.cols());
    if (n == 0) {
        throw DataError("fit_gbdt: empty training set");
    }
    if (static_cast<std::size_t>(y.size()) != n) {
        throw ConfigError("fit_gbdt: label count does not match row count");
    }
    if (train.x.names.size() != static_cast<std::size_t>(p)) {
        throw ConfigError("fit_gbdt: feature name count does not match column count");
    }
    const bool early = cfg.early_stop_rounds > 0;
    if (early && valid.x.rows() == 0) {
        throw ConfigError("fit_gbdt: early stopping needs a non-empty validation set");
    }
    if (valid.x.rows() > 0 && valid.x.names != train.x.names) {
        throw ConfigError("fit_gbdt: validation columns differ from training columns");
    }
    if (cfg.objective == Objective::binary_logistic) {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (y(i) != 0.0 && y(i) != 1.0) {
                throw DataError("fit_gbdt: binary labels must be 0 or 1");
            }
        }
        const double pos = y.sum();
        if (cfg.class_weighting == ClassWeighting::inverse_frequency && (pos == 0.0 || pos == static_cast<double>(n))) {
            throw DataError("fit_gbdt: training labels are single-class; inverse-frequency weights are undefined");
        }
    }

    const std::vector<double> w = class_weights(y, cfg);
    std::vector<double> wv;
    if (valid.x.rows() > 0) {
        wv.assign(static_cast<std::size_t>(valid.y.size()), 1.0);
        if (cfg.objective == Objective::binary_logistic && cfg.class_weighting == ClassWeighting::inverse_frequency) {
            const double wp = detail::class_weight_positive(y);
            const double wn = detail::class_weight_negative(y);
            for (Eigen::Index i = 0; i < valid.y.size(); ++i) {
                wv[static_cast<std::size_t>(i)] = valid.y(i) > 0.5 ? wp : wn;
            }
        }
    }

    GbdtModel model;
    model.learning_rate = cfg.learning_rate;
    model.objective = cfg.objective;
    model.feature_names = train.x.names;
    {
        double sw = 0.0;
        double swy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sw += w[i];
            swy += w[i] * y(static_cast<Eigen::Index>(i));
        }
        const double mu = swy / sw;
        if (cfg.objective == Objective::binary_logistic) {
            const double c = std::clamp(mu, 1e-6, 1.0 - 1e-6);
            model.base_score = std::log(c / (1.0 - c));
        } else {
            model.base_score = mu;
        }
    }

    std::vector<std::vector<int>> sorted(static_cast<std::size_t>(p));
    for (int f = 0; f < p; ++f) {
        auto& idx = sorted[static_cast<std::size_t>(f)];
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
    }

    std::vector<double> margin(n, model.base_score);
    std::vector<double> vmargin(static_cast<std::size_t>(valid.x.rows()), model.base_score);
    auto weighted_loss = [&](const std::vector<double>& m, const Eigen::VectorXd& labels, const std::vector<double>& wt) {
        double s = 0.0;
        double sw = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            s += wt[i] * detail::pointwise_loss(cfg.objective, m[i], labels(static_cast<Eigen::Index>(i)));
            sw += wt[i];
        }
        return sw > 0.0 ? s / sw : 0.0;
    };
    model.train_loss.push_back(weighted_loss(margin, y, w));
    if (valid.x.rows() > 0) {
        model.valid_loss.push_back(weighted_loss(vmargin, valid.y, wv));
    }

    std::vector<double> g(n);
    std::vector<double> h(n);
    std::vector<char> in_sample(n, 1);
    std::vector<int> perm(n);
    const auto sample_n = static_cast<std::size_t>(std::max<double>(1.0, std::floor(cfg.row_subsample * static_cast<double>(n))));
    detail::TreeBuilder builder(X, sorted, cfg);
    double best_valid = model.valid_loss.empty() ? 0.0 : model.valid_loss.front();
    int best_round = 0;
    int since_best = 0;

    for (int round = 0; round < cfg.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double yi = y(static_cast<Eigen::Index>(i));
            if (cfg.objective == Objective::binary_logistic) {
                const double pr = sigmoid(margin[i]);
                g[i] = w[i] * (pr - yi);
                h[i] = w[i] * pr * (1.0 - pr);
            } else {
                g[i] = w[i] * (margin[i] - yi);
                h[i] = w[i];
            }
        }
        if (sample_n < n) {
            Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(round)));
            std::iota(perm.begin(), perm.end(), 0);
            std::fill(in_sample.begin(), in_sample.end(), 0);
            for (std::size_t i = 0; i < sample_n; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
                std::swap(perm[i], perm[j]);
                in_sample[static_cast<std::size_t>(perm[i])] = 1;
            }
        }
        RegressionTree tree = builder.build(g, h, in_sample);
        for (std::size_t i = 0; i < n; ++i) {
            margin[i] += cfg.learning_rate * tree.predict(X.row(static_cast<Eigen::Index>(i)));
        }
        for (std::size_t i = 0; i < vmargin.size(); ++i) {
            vmargin[i] += cfg.learning_rate * tree.predict(valid.x.data.row(static_cast<Eigen::Index>(i)));
        }
        model.trees.push_back(std::move(tree));
        model.train_loss.push_back(weighted_loss(margin, y, w));
        if (valid.x.rows() > 0) {
            const double vl = weighted_loss(vmargin, valid.y, wv);
            model.valid_loss.push_back(vl);
            if (vl < best_valid) {
                best_valid = vl;
                best_round = round + 1;
                since_best = 0;
            } else {
                ++since_best;
            }
            if (early && since_best >= cfg.early_stop_rounds) {
                break;
            }
        } else {
            best_round = round + 1;
        }
    }
    if (early) {
        model.trees.resize(static_cast<std::size_t>(best_round));
    }
    model.best_round = static_cast<int>(model.trees.size());
    return model;
}

namespace detail {
/// Column permutation mapping model features to positions in `names`.
inline std::vector<Eigen::Index> schema_map(const std::vector<std::string>& model_names, const std::vector<std::string>& names) {
    std::vector<std::string> missing;
    std::vector<std::string> extra;
    std::vector<Eigen::Index> map(model_names.size(), -1);
    for (std::size_t i = 0; i < model_names.size(); ++i) {
        auto it = std::find(names.begin(), names.end(), model_names[i]);
        if (it == names.end()) {
            missing.push_back(model_names[i]);
        } else {
            map[i] = static_cast<Eigen::Index>(it - names.begin());
        }
    }
    for (const auto& nm : names) {
        if (std::find(model_names.begin(), model_names.end(), nm) == model_names.end()) {
            extra.push_back(nm);
        }
    }
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "feature schema mismatch;";
        if (!missing.empty()) {
            msg += " missing:";
            for (const auto& m : missing) {
                msg += " " + m;
            }
            msg += ";";
        }
        if (!extra.empty()) {
            msg += " extra:";
            for (const auto& e : extra) {
                msg += " " + e;
            }
        }
        throw DataError(msg);
    }
    return map;
}
}  // namespace detail

/// Raw ensemble output per row (log-odds for the logistic objective).
inline std::vector<double> predict_margin(const GbdtModel& model, const FeatureMatrix& rows) {
    const auto map = detail::schema_map(model.feature_names, rows.names);
    std::vector<double> out(static_cast<std::size_t>(rows.rows()));
    Eigen::VectorXd buf(static_cast<Eigen::Index>(map.size()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (std::size_t c = 0; c < map.size(); ++c) {
            buf(static_cast<Eigen::Index>(c)) = rows.data(i, map[c]);
        }
        out[static_cast<std::size_t>(i)] = model.margin(buf);
    }
    return out;
}

/// sigmoid(base_score + sum_t lr * leaf_t(row)) per row.
inline std::vector<double> predict_xg(const GbdtModel& model, const FeatureMatrix& rows) {
    auto m = predict_margin(model, rows);
    if (model.objective == Objective::binary_logistic) {
        for (auto& v : m) {
            v = sigmoid(v);
        }
    }
    return m;
}

/// C = M + p_xg.
inline double composite_c(double momentum, double p_xg) { return momentum + p_xg; }

inline nlohmann::ordered_json to_json(const GbdtModel& m) {
    nlohmann::ordered_json j;
    j["objective"] = m.objective == Objective::binary_logistic ? "binary_logistic" : "squared_error";
    j["base_score"] = m.base_score;
    j["learning_rate"] = m.learning_rate;
    j["best_round"] = m.best_round;
    j["feature_names"] = m.feature_names;
    auto& trees = j["trees"] = nlohmann::ordered_json::array();
    for (const auto& t : m.trees) {
        auto nodes = nlohmann::ordered_json::array();
        for (const auto& nd : t.nodes) {
            if (nd.is_leaf()) {
                nodes.push_back({{"leaf", nd.value}, {"cover", nd.cover}});
            } else {
                nodes.push_back({{"feature", nd.feature}, {"threshold", nd.threshold}, {"left", nd.left}, {"right", nd.right}, {"gain", nd.gain}, {"cover", nd.cover}, {"value", nd.value}});
            }
        }
        trees.push_back(std::move(nodes));
    }
    j["train_loss"] = m.train_loss;
    j["valid_loss"] = m.valid_loss;
    return j;
}

inline GbdtModel gbdt_model_from_json(const nlohmann::json& j) {
    GbdtModel m;
    try {
        m.objective = j.at("objective").get<std::string>() == "squared_error" ? Objective::squared_error : Objective::binary_logistic;
        m.base_score = j.at("base_score").get<double>();
        m.learning_rate = j.at("learning_rate").get<double>();
        m.best_round = j.value("best_round", 0);
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        for (const auto& jt : j.at("trees")) {
            RegressionTree t;
            for (const auto& jn : jt) {
                TreeNode nd;
                if (jn.contains("leaf")) {
                    nd.value = jn.at("leaf").get<double>();
                } else {
                    nd.feature = jn.at("feature").get<int>();
                    nd.threshold = jn.at("threshold").get<double>();
                    nd.left = jn.at("left").get<int>();
                    nd.right = jn.at("right").get<int>();
                    nd.gain = jn.value("gain", 0.0);
                    nd.value = jn.value("value", 0.0);
                }
                nd.cover = jn.value("cover", 0.0);
                t.nodes.push_back(nd);
            }
            m.trees.push_back(std::move(t));
        }
        m.train_loss = j.value("train_loss", std::vector<double>{});
        m.valid_loss = j.value("valid_loss", std::vector<double>{});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed gbdt model: ") + e.what());
    }
    return m;
}

}  // namespace mxg
