#include <gtest/gtest.h>

#include <set>

#include "mxg/causal.hpp"
#include "mxg/synth.hpp"

using namespace mxg;

namespace {

Eigen::MatrixXd normals(std::size_t n, int p, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> z;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), p);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (int j = 0; j < p; ++j) {
            X(i, j) = z(rng);
        }
    }
    return X;
}

std::vector<int> coin(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> t(n);
    for (auto& v : t) {
        v = uniform01(rng) < 0.5 ? 1 : 0;
    }
    return t;
}

CausalTable table(double ate, std::size_t n = 20000, std::uint64_t seed = 11) {
    CausalSynthConfig c;
    c.seed = seed;
    c.n = n;
    c.planted_ate = ate;
    return generate_causal(c);
}

XLearnerConfig xcfg(std::uint64_t seed = 5) {
    XLearnerConfig c;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Propensity, FairCoinGivesHalf) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto X = normals(10000, 2, seed);
        const auto t = coin(10000, seed + 10);
        const auto r = estimate_propensity(X, t);
        for (double g : r.propensity) {
            ASSERT_NEAR(g, 0.5, 0.05) << seed;
        }
        EXPECT_FALSE(r.separation);
    }
}

TEST(Propensity, SeparationClipsAndFlags) {
    const auto X = normals(400, 2, 3);
    std::vector<int> t(400);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        t[static_cast<std::size_t>(i)] = X(i, 0) > 0.0 ? 1 : 0;
    }
    PropensityOptions o;
    o.l2 = 1e-6;
    const auto r = estimate_propensity(X, t, o);
    EXPECT_TRUE(r.separation);
    EXPECT_GT(r.n_clipped, 0u);
    for (double g : r.propensity) {
        EXPECT_GE(g, 0.01);
        EXPECT_LE(g, 0.99);
    }
    EXPECT_EQ(*std::min_element(r.propensity.begin(), r.propensity.end()), 0.01);
    EXPECT_EQ(*std::max_element(r.propensity.begin(), r.propensity.end()), 0.99);
}

TEST(Propensity, ColumnOrderInvariant) {
    const auto tab = table(0.12, 3000);
    const auto a = estimate_propensity(tab.X, tab.treatment).propensity;
    Eigen::MatrixXd Xr = tab.X.rowwise().reverse();
    const auto b = estimate_propensity(Xr, tab.treatment).propensity;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_NEAR(a[i], b[i], 1e-9);
    }
}

TEST(Propensity, HistogramsCountEachGroup) {
    const auto tab = table(0.12, 2000);
    const auto r = estimate_propensity(tab.X, tab.treatment);
    const auto n1 = static_cast<std::size_t>(std::count(tab.treatment.begin(), tab.treatment.end(), 1));
    EXPECT_EQ(std::accumulate(r.treated.counts.begin(), r.treated.counts.end(), std::size_t{0}), n1);
    EXPECT_EQ(std::accumulate(r.control.counts.begin(), r.control.counts.end(), std::size_t{0}), tab.treatment.size() - n1);
}

TEST(Propensity, SingleGroupIsAnError) {
    const auto X = normals(50, 2, 1);
    const std::vector<int> t(50, 1);
    EXPECT_THROW(estimate_propensity(X, t), DataError);
    const std::vector<int> bad(50, 2);
    EXPECT_THROW(estimate_propensity(X, bad), DataError);
}

TEST(XLearner, NullEffectIsZero) {
    const auto tab = table(0.0);
    const auto g = estimate_propensity(tab.X, tab.treatment).propensity;
    const auto r = x_learner_ate(tab.X, tab.treatment, tab.outcome, g, xcfg());
    EXPECT_NEAR(r.ate_cv, 0.0, 0.02);
}

TEST(XLearner, PlantedEffectRecoveredWhereNaiveFails) {
    const auto tab = table(0.12);
    const auto g = estimate_propensity(tab.X, tab.treatment).propensity;
    const auto r = x_learner_ate(tab.X, tab.treatment, tab.outcome, g, xcfg());
    EXPECT_NEAR(r.ate_cv, 0.12, 0.02);
    EXPECT_GT(std::abs(naive_difference(tab.treatment, tab.outcome) - 0.12), 0.05);
    // cross-fitted and full-sample estimates agree
    EXPECT_NEAR(r.ate_cv, r.ate_full, 0.03);
    EXPECT_EQ(r.n_treated + r.n_control, tab.treatment.size());
    EXPECT_TRUE(r.warnings.empty());
}

TEST(XLearnerProperty, ConstantShiftLeavesAteUnchanged) {
    const auto tab = table(0.12, 2000, 4);
    const auto g = estimate_propensity(tab.X, tab.treatment).propensity;
    const auto a = x_learner_ate(tab.X, tab.treatment, tab.outcome, g, xcfg());
    for (double c : {-3.0, 0.5, 10.0}) {
        auto y = tab.outcome;
        for (auto& v : y) {
            v += c;
        }
        const auto b = x_learner_ate(tab.X, tab.treatment, y, g, xcfg());
        EXPECT_NEAR(a.ate_cv, b.ate_cv, 1e-9) << c;
        EXPECT_NEAR(a.ate_full, b.ate_full, 1e-9) << c;
    }
}

TEST(XLearnerProperty, SwappingLabelsNegatesAte) {
    const auto tab = table(0.12, 2000, 6);
    const auto g = estimate_propensity(tab.X, tab.treatment).propensity;
    const auto a = x_learner_ate(tab.X, tab.treatment, tab.outcome, g, xcfg());
    std::vector<int> t2(tab.treatment.size());
    std::vector<double> g2(g.size());
    for (std::size_t i = 0; i < t2.size(); ++i) {
        t2[i] = 1 - tab.treatment[i];
        g2[i] = 1.0 - g[i];
    }
    const auto b = x_learner_ate(tab.X, t2, tab.outcome, g2, xcfg());
    EXPECT_NEAR(a.ate_cv, -b.ate_cv, 1e-9);
    EXPECT_NEAR(a.ate_full, -b.ate_full, 1e-9);
}

TEST(XLearnerProperty, RandomizedMatchesDifferenceInMeans) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const std::size_t n = 4000;
        const auto X = normals(n, 3, seed);
        const auto t = coin(n, seed + 100);
        Rng rng(seed + 200);
        std::normal_distribution<double> z(0.0, 0.3);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            y[i] = std::sin(X(r, 0)) + 0.5 * X(r, 1) + 0.1 * t[i] + z(rng);
        }
        const auto g = estimate_propensity(X, t).propensity;
        const auto r = x_learner_ate(X, t, y, g, xcfg(seed));
        const auto bs = bootstrap_ci(
            [&](std::span<const std::size_t> idx) {
                std::vector<int> tt;
                std::vector<double> yy;
                for (auto i : idx) {
                    tt.push_back(t[i]);
                    yy.push_back(y[i]);
                }
                return naive_difference(tt, yy);
            },
            n, 200, 0.95, seed);
        EXPECT_NEAR(r.ate_cv, naive_difference(t, y), 2.0 * bs.sd) << seed;
    }
}

TEST(XLearner, DisjointSupportsAreAnError) {
    const auto X = normals(200, 2, 1);
    std::vector<int> t(200);
    std::vector<double> g(200);
    std::vector<double> y(200, 0.0);
    for (std::size_t i = 0; i < 200; ++i) {
        t[i] = i % 2;
        g[i] = t[i] == 1 ? 0.8 : 0.2;
    }
    EXPECT_THROW(x_learner_ate(X, t, y, g, xcfg()), DataError);
}

TEST(XLearner, SmallGroupWarns) {
    const auto X = normals(300, 2, 2);
    std::vector<int> t(300, 0);
    std::vector<double> y(300);
    for (std::size_t i = 0; i < 300; ++i) {
        if (i % 10 == 0) {
            t[i] = 1;
        }
        y[i] = X(static_cast<Eigen::Index>(i), 0) + 0.2 * t[i];
    }
    const std::vector<double> g(300, 0.1);
    const auto r = x_learner_ate(X, t, y, g, xcfg());
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("treated group is small"), std::string::npos);
}

TEST(XLearner, RejectsBadInputs) {
    const auto X = normals(100, 2, 1);
    const auto t = coin(100, 1);
    const std::vector<double> y(100, 0.0);
    const std::vector<double> g(100, 0.5);
    EXPECT_THROW(x_learner_ate(X, t, std::vector<double>(99, 0.0), g, xcfg()), ConfigError);
    auto c = xcfg();
    c.folds = 1;
    EXPECT_THROW(x_learner_ate(X, t, y, g, c), ConfigError);
    EXPECT_THROW(x_learner_ate(X, t, y, std::vector<double>(100, 1.0), xcfg()), DataError);
}

TEST(Bootstrap, ConstantStatisticHasZeroVariance) {
    const auto r = bootstrap_ci([](std::span<const std::size_t>) { return 0.37; }, 50, 200);
    EXPECT_EQ(r.ci_low, 0.37);
    EXPECT_EQ(r.ci_high, 0.37);
    EXPECT_TRUE(r.zero_variance);
    EXPECT_FALSE(r.p_value.has_value());
}

TEST(Bootstrap, TooFewResamplesIsAnError) {
    EXPECT_THROW(bootstrap_ci([](std::span<const std::size_t>) { return 0.0; }, 10, 99), ConfigError);
}

TEST(BootstrapProperty, CiContainsMedianAndIsDeterministic) {
    Rng rng(8);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> s(30 + rep * 7);
        for (auto& v : s) {
            v = uniform01(rng) * 3.0 - 1.0;
        }
        const auto a = bootstrap_mean(s, 300, 0.9, static_cast<std::uint64_t>(rep), 1);
        const auto b = bootstrap_mean(s, 300, 0.9, static_cast<std::uint64_t>(rep), 4);
        EXPECT_LE(a.ci_low, a.median);
        EXPECT_LE(a.median, a.ci_high);
        EXPECT_EQ(a.replicates, b.replicates);
        EXPECT_EQ(a.ci_low, b.ci_low);
        ASSERT_TRUE(a.p_value.has_value());
        EXPECT_GT(*a.p_value, 0.0);
        EXPECT_LE(*a.p_value, 1.0);
    }
}

TEST(Balance, IdenticalGroupsNearZero) {
    const auto X = normals(20000, 3, 4);
    const auto t = coin(20000, 5);
    const std::vector<double> g(20000, 0.5);
    for (const auto& b : covariate_balance(X, {"a", "b", "c"}, t, g)) {
        EXPECT_NEAR(b.smd_raw, 0.0, 0.05) << b.covariate;
        EXPECT_NEAR(b.smd_weighted, b.smd_raw, 1e-12);
    }
}

TEST(Balance, UnitShiftGivesSmdOne) {
    auto X = normals(40000, 1, 6);
    const auto t = coin(40000, 7);
    for (std::size_t i = 0; i < t.size(); ++i) {
        X(static_cast<Eigen::Index>(i), 0) += t[i];
    }
    const std::vector<double> g(40000, 0.5);
    EXPECT_NEAR(covariate_balance(X, {"x"}, t, g)[0].smd_raw, 1.0, 0.03);
}

TEST(Balance, TruePropensityWeightingShrinksEverySmd) {
    const auto tab = table(0.12, 20000, 9);
    const auto rows = covariate_balance(tab.X, tab.names, tab.treatment, tab.true_propensity);
    for (const auto& b : rows) {
        EXPECT_LT(std::abs(b.smd_weighted), std::abs(b.smd_raw)) << b.covariate;
    }
}

TEST(Balance, ZeroVarianceCovariateIsFlagged) {
    Eigen::MatrixXd X = normals(100, 2, 1);
    X.col(1).setConstant(3.0);
    const auto t = coin(100, 2);
    const auto rows = covariate_balance(X, {"a", "k"}, t, std::vector<double>(100, 0.5));
    EXPECT_FALSE(rows[0].undefined);
    EXPECT_TRUE(rows[1].undefined);
}

TEST(CausalReport, InvariantsAndTableFields) {
    const auto tab = table(0.12, 3000, 12);
    CausalOptions o;
    o.xlearner.seed = 1;
    const auto r = run_causal(tab.X, tab.names, tab.treatment, tab.outcome, o);
    EXPECT_LE(r.ci_low, r.ate_bootstrap);
    EXPECT_LE(r.ate_bootstrap, r.ci_high);
    ASSERT_TRUE(r.p_value.has_value());
    EXPECT_GT(*r.p_value, 0.0);
    EXPECT_LE(*r.p_value, 1.0);
    EXPECT_EQ(r.per_unit_effects.size(), tab.treatment.size());
    EXPECT_EQ(r.balance.size(), tab.names.size());

    const auto t2 = results_table_json(r);
    std::vector<std::string> metrics;
    for (const auto& row : t2) {
        metrics.push_back(row["metric"]);
    }
    EXPECT_EQ(metrics, (std::vector<std::string>{"Momentum Score ATE (CV)", "Momentum Score ATE (Bootstrap)", "95% CI Lower", "95% CI Upper",
                                                 "Score p-value"}));
    const auto j = to_json(r);
    for (const char* k : {"ate_cv", "ate_bootstrap", "ci_low", "ci_high", "p_value", "propensity_histograms", "balance", "per_unit_effects"}) {
        EXPECT_TRUE(j.contains(k)) << k;
    }
    EXPECT_EQ(j["reference"]["ate_cv"], 0.12576);
}

TEST(CausalReport, IdenticalAcrossThreadCounts) {
    const auto tab = table(0.12, 1500, 13);
    CausalOptions o;
    o.n_resamples = 200;
    o.xlearner.threads = 1;
    const auto a = to_json(run_causal(tab.X, tab.names, tab.treatment, tab.outcome, o)).dump();
    o.xlearner.threads = 3;
    const auto b = to_json(run_causal(tab.X, tab.names, tab.treatment, tab.outcome, o)).dump();
    EXPECT_EQ(a, b);
}

TEST(CausalReport, SkippingTheFullFitKeepsCrossFitResults) {
    const auto tab = table(0.12, 1500, 14);
    CausalOptions o;
    o.n_resamples = 200;
    const auto a = run_causal(tab.X, tab.names, tab.treatment, tab.outcome, o);
    o.xlearner.fit_full = false;
    const auto b = run_causal(tab.X, tab.names, tab.treatment, tab.outcome, o);
    EXPECT_EQ(a.ate_cv, b.ate_cv);
    EXPECT_EQ(a.ci_low, b.ci_low);
    EXPECT_EQ(a.ci_high, b.ci_high);
    EXPECT_TRUE(std::isfinite(a.ate_full));
    EXPECT_TRUE(std::isnan(b.ate_full));
    EXPECT_TRUE(to_json(b)["ate_full"].is_null());
}
