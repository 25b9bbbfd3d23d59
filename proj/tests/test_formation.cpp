#include <numbers>

#include <gtest/gtest.h>

#include "mxg/formation.hpp"
#include "oracles.hpp"

using namespace mxg;

namespace {

Eigen::MatrixXd gaussian(int n, int d, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < X.size(); ++i) {
        X.data()[i] = nd(rng);
    }
    return X;
}

// Correlated 10-column data: a few latent factors plus noise.
Eigen::MatrixXd factor_data(int n, std::uint64_t seed) {
    const Eigen::MatrixXd F = gaussian(n, 3, seed);
    const Eigen::MatrixXd L = gaussian(3, 10, seed + 1000);
    return F * L + 0.3 * gaussian(n, 10, seed + 2000);
}

struct Blobs {
    Eigen::MatrixXd X;
    Eigen::MatrixXd centers;
    std::vector<int> label;
};

Blobs three_blobs(int per, std::uint64_t seed) {
    Blobs b;
    b.centers.resize(3, 2);
    b.centers << 0, 0, 10, 0, 5, 10;
    Rng rng(seed);
    std::normal_distribution<double> nd(0.0, 0.1);
    b.X.resize(3 * per, 2);
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < per; ++i) {
            const int r = c * per + i;
            b.X(r, 0) = b.centers(c, 0) + nd(rng);
            b.X(r, 1) = b.centers(c, 1) + nd(rng);
            b.label.push_back(c);
        }
    }
    return b;
}

FormationClusters two_clusters() {
    FormationClusters c;
    c.k = 2;
    c.assignments = {0, 0, 1, 1};
    c.member_counts = {2, 2};
    return c;
}

std::vector<Point2> rotate(const std::vector<Point2>& pts, double a) {
    std::vector<Point2> out;
    for (const auto& p : pts) {
        out.push_back({std::cos(a) * p.x - std::sin(a) * p.y, std::sin(a) * p.x + std::cos(a) * p.y});
    }
    return out;
}

WindowFeatures positioned(const std::array<double, kPositionDims>& pos) {
    WindowFeatures w;
    w.positions = pos;
    w.role_present.fill(true);
    return w;
}

}  // namespace

TEST(FitPca, LineIsOneComponent) {
    Rng rng(1);
    Eigen::VectorXd dir = gaussian(10, 1, 2).col(0).normalized();
    Eigen::MatrixXd X(60, 10);
    for (int i = 0; i < 60; ++i) {
        X.row(i) = (uniform01(rng) * 10.0 - 5.0) * dir.transpose();
    }
    const auto p = fit_pca(X);
    ASSERT_EQ(p.n_components(), 1);
    EXPECT_NEAR(p.explained_variance_ratio(0), 1.0, 1e-9);
}

TEST(FitPca, IsotropicKeepsNineComponents) {
    const auto p = fit_pca(gaussian(20000, 10, 3));
    EXPECT_EQ(p.n_components(), 9);
    for (Eigen::Index i = 0; i < 10; ++i) {
        EXPECT_NEAR(p.all_variance_ratio(i), 0.1, 0.01);
    }
}

TEST(FitPca, ReconstructionInsideRetainedSubspace) {
    const auto p = fit_pca(factor_data(200, 4));
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        Eigen::VectorXd e(p.n_components());
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            e(i) = uniform01(rng) * 4.0 - 2.0;
        }
        const Eigen::VectorXd raw = p.back_project(e);
        EXPECT_LT((p.project(raw) - e).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(FitPca, ErrorsOnZeroVarianceOrTooFewRows) {
    Eigen::MatrixXd X = factor_data(50, 6);
    X.col(4).setConstant(3.0);
    EXPECT_THROW(fit_pca(X), DataError);
    EXPECT_THROW(fit_pca(factor_data(8, 7)), DataError);
    EXPECT_THROW(fit_pca(factor_data(50, 7), 0.0), ConfigError);
}

TEST(FitPcaProperty, OrthonormalComponentsAndSortedRatios) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = fit_pca(factor_data(120, seed), 0.99);
        const Eigen::MatrixXd G = p.components * p.components.transpose();
        EXPECT_LT((G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE(p.all_variance_ratio.sum(), 1.0 + 1e-9);
        for (Eigen::Index i = 1; i < p.all_variance_ratio.size(); ++i) {
            EXPECT_GE(p.all_variance_ratio(i - 1), p.all_variance_ratio(i));
        }
        for (Eigen::Index r = 0; r < p.components.rows(); ++r) {
            Eigen::Index arg = 0;
            p.components.row(r).cwiseAbs().maxCoeff(&arg);
            EXPECT_GT(p.components(r, arg), 0.0);
        }
    }
}

TEST(FitPcaProperty, MatchesBruteForceJacobi) {
    for (std::uint64_t seed = 0; seed < 18; ++seed) {
        const int n = 15 + static_cast<int>(seed) * 2;
        const Eigen::MatrixXd X = factor_data(n, seed + 50);
        const auto p = fit_pca(X, 1.0);
        Eigen::VectorXd ratios;
        Eigen::MatrixXd vecs;
        oracle::brute_force_pca(X, ratios, vecs);
        ASSERT_EQ(p.all_variance_ratio.size(), ratios.size());
        EXPECT_LT((p.all_variance_ratio - ratios).cwiseAbs().maxCoeff(), 1e-9) << "n = " << n;
        for (int c = 0; c < p.n_components(); ++c) {
            if (ratios(c) < 1e-6) {
                continue;  // null-space directions are not unique
            }
            const Eigen::VectorXd a = p.components.row(c).transpose();
            const Eigen::VectorXd b = vecs.col(c);
            EXPECT_NEAR(std::abs(a.dot(b)), 1.0, 1e-9) << "n = " << n << " component " << c;
        }
    }
}

TEST(KMeans, SingleClusterIsTheMean) {
    const Eigen::MatrixXd X = gaussian(100, 3, 8);
    const auto r = kmeans(X, 1, 1);
    EXPECT_LT((r.centroids.row(0) - X.colwise().mean()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KMeans, RecoversThreeBlobs) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto b = three_blobs(100, seed);
        const auto r = kmeans(b.X, 3, seed);
        std::array<int, 3> map{-1, -1, -1};
        for (int c = 0; c < 3; ++c) {
            Eigen::Index best = 0;
            (r.centroids.rowwise() - b.centers.row(c)).rowwise().norm().minCoeff(&best);
            map[static_cast<std::size_t>(c)] = static_cast<int>(best);
            EXPECT_LT((r.centroids.row(best) - b.centers.row(c)).norm(), 0.05);
        }
        for (std::size_t i = 0; i < b.label.size(); ++i) {
            EXPECT_EQ(r.assignments[i], map[static_cast<std::size_t>(b.label[i])]);
        }
    }
}

TEST(KMeans, KLargerThanNIsAnError) {
    EXPECT_THROW(kmeans(gaussian(3, 2, 1), 4, 1), DataError);
    EXPECT_THROW(kmeans(gaussian(3, 2, 1), 0, 1), ConfigError);
}

TEST(KMeansProperty, InertiaNeverIncreasesAndSeedIsDeterministic) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Eigen::MatrixXd X = factor_data(300, seed);
        std::vector<KMeansResult> runs;
        const auto r = kmeans(X, 2 + static_cast<int>(seed % 5), seed, {}, &runs);
        ASSERT_FALSE(runs.empty());
        for (const auto& run : runs) {
            for (std::size_t i = 1; i < run.inertia_history.size(); ++i) {
                EXPECT_LE(run.inertia_history[i], run.inertia_history[i - 1] * (1.0 + 1e-12));
            }
        }
        const auto again = kmeans(X, 2 + static_cast<int>(seed % 5), seed);
        EXPECT_EQ(again.assignments, r.assignments);
        EXPECT_TRUE(again.centroids == r.centroids);
    }
}

TEST(KMeansProperty, AssignmentsAreNearestCentroid) {
    const Eigen::MatrixXd X = factor_data(200, 3);
    const auto r = kmeans(X, 4, 3);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Eigen::Index best = 0;
        (r.centroids.rowwise() - X.row(i)).rowwise().squaredNorm().minCoeff(&best);
        EXPECT_EQ(r.assignments[static_cast<std::size_t>(i)], best);
    }
}

TEST(SelectK, PrefersTheTrueBlobCount) {
    const auto b = three_blobs(60, 4);
    EXPECT_EQ(select_k_by_silhouette(b.X, 2, 8, 1).k, 3);
    EXPECT_THROW(select_k_by_silhouette(b.X, 1, 8, 1), ConfigError);
}

TEST(SelectOptimalCluster, ArgmaxOfMeans) {
    const std::vector<double> s{1.0, 1.2, 1.8, 2.0};
    const auto c = select_optimal_cluster(two_clusters(), s);
    EXPECT_EQ(c.optimal_cluster_id, 1);
    EXPECT_NEAR(c.mean_composite[0], 1.1, 1e-12);
    EXPECT_NEAR(c.mean_composite[1], 1.9, 1e-12);
}

TEST(SelectOptimalCluster, TiesGoToLowerId) {
    const std::vector<double> s{1.0, 2.0, 2.0, 1.0};
    EXPECT_EQ(select_optimal_cluster(two_clusters(), s).optimal_cluster_id, 0);
}

TEST(SelectOptimalCluster, ScaleInvariantAndErrors) {
    const std::vector<double> s{0.3, 1.7, 0.9, 1.4};
    std::vector<double> scaled;
    for (double v : s) {
        scaled.push_back(v * 7.5);
    }
    EXPECT_EQ(select_optimal_cluster(two_clusters(), s).optimal_cluster_id, select_optimal_cluster(two_clusters(), scaled).optimal_cluster_id);
    EXPECT_THROW(select_optimal_cluster(two_clusters(), std::vector<double>{1.0}), DataError);
    auto empty = two_clusters();
    empty.k = 3;
    EXPECT_THROW(select_optimal_cluster(empty, s), DataError);
}

TEST(Deviation, Examples) {
    std::array<double, kPositionDims> c{};
    for (int i = 0; i < kPositionDims; ++i) {
        c[static_cast<std::size_t>(i)] = 10.0 + i;
    }
    EXPECT_EQ(deviation(c, c), 0.0);
    auto w = c;
    w[0] += 3.0;
    w[1] += 4.0;
    EXPECT_DOUBLE_EQ(deviation(w, c), 1.0);
    EXPECT_THROW(deviation(std::vector<double>(8, 0.0), c), DataError);
    auto missing = positioned(w);
    missing.role_present[3] = false;
    EXPECT_THROW(deviation(missing, c), DataError);
}

TEST(DeviationProperty, TranslationCovariant) {
    Rng rng(6);
    for (int t = 0; t < 100; ++t) {
        std::array<double, kPositionDims> a{};
        std::array<double, kPositionDims> b{};
        for (int i = 0; i < kPositionDims; ++i) {
            a[static_cast<std::size_t>(i)] = uniform01(rng) * 100.0;
            b[static_cast<std::size_t>(i)] = uniform01(rng) * 100.0;
        }
        const double dx = uniform01(rng) * 50.0 - 25.0;
        const double dy = uniform01(rng) * 50.0 - 25.0;
        auto a2 = a;
        auto b2 = b;
        for (int r = 0; r < kTrackedRoles; ++r) {
            a2[static_cast<std::size_t>(2 * r)] += dx;
            b2[static_cast<std::size_t>(2 * r)] += dx;
            a2[static_cast<std::size_t>(2 * r + 1)] += dy;
            b2[static_cast<std::size_t>(2 * r + 1)] += dy;
        }
        EXPECT_NEAR(deviation(a2, b2), deviation(a, b), 1e-9);
    }
}

TEST(LowestPercentile, QuarterOfDistinctValues) {
    std::vector<double> v;
    for (int i = 0; i < 100; ++i) {
        v.push_back(static_cast<double>((i * 37) % 100));
    }
    const auto f = lowest_percentile_flags(v, 0.25);
    EXPECT_EQ(std::count(f.begin(), f.end(), true), 25);
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_EQ(f[i], v[i] < 25.0);
    }
}

TEST(ConvexHull, Examples) {
    const std::vector<Point2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    EXPECT_DOUBLE_EQ(convex_hull_area(square), 1.0);
    EXPECT_EQ(convex_hull_area({{0, 0}, {1, 1}, {2, 2}, {3, 3}}), 0.0);
    auto with_inside = square;
    with_inside.push_back({0.5, 0.5});
    with_inside.push_back({0.2, 0.7});
    EXPECT_DOUBLE_EQ(convex_hull_area(with_inside), 1.0);
    EXPECT_THROW(convex_hull_area({{0, 0}, {1, 1}}), DataError);
}

TEST(ConvexHullProperty, PermutationAndRotationInvariant) {
    Rng rng(9);
    for (int t = 0; t < 50; ++t) {
        std::vector<Point2> pts;
        const int n = 3 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) {
            pts.push_back({uniform01(rng) * 50.0, uniform01(rng) * 50.0});
        }
        const double a = convex_hull_area(pts);
        auto shuffled = pts;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_NEAR(convex_hull_area(shuffled), a, 1e-9);
        EXPECT_NEAR(convex_hull_area(rotate(pts, uniform01(rng) * 2.0 * std::numbers::pi)), a, 1e-9);
        const auto h = convex_hull(pts);
        EXPECT_LE(h.size(), pts.size());
    }
}

TEST(DefensivePositions, Examples) {
    std::array<double, kPositionDims> p{};
    for (int i = 0; i < kPositionDims; ++i) {
        p[static_cast<std::size_t>(i)] = 30.0 + i;
    }
    std::vector<WindowFeatures> same(6, positioned(p));
    const std::vector<double> m6{1, 2, 3, 4, 5, 6};
    EXPECT_EQ(defensive_positions(same, m6), p);

    std::vector<WindowFeatures> w;
    for (int k = 0; k < 4; ++k) {
        auto q = p;
        for (auto& v : q) {
            v += 10.0 * k;
        }
        w.push_back(positioned(q));
    }
    const std::vector<double> m{1, 2, 3, 4};
    EXPECT_EQ(defensive_positions(w, m), w[0].positions);

    std::vector<WindowFeatures> rev(w.rbegin(), w.rend());
    const std::vector<double> mrev(m.rbegin(), m.rend());
    EXPECT_EQ(defensive_positions(rev, mrev), defensive_positions(w, m));
    EXPECT_THROW(defensive_positions(w, std::vector<double>{1.0}), DataError);
}
