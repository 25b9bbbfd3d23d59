#pragma once

// Formation archetypes from five-player positional vectors:
// standardize -> PCA -> K-Means -> optimal cluster by mean composite score,
// plus the per-window deviation metric and convex-hull comparisons.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mxg/common.hpp"
#include "mxg/event.hpp"
#include "mxg/ingest.hpp"

namespace mxg {

inline constexpr int kPositionDims = 2 * kTrackedRoles;

struct PcaModel {
    Eigen::VectorXd means;
    Eigen::VectorXd scales;
    Eigen::MatrixXd components;  ///< k x d, orthonormal rows
    Eigen::VectorXd explained_variance_ratio;  ///< k, nonincreasing
    Eigen::VectorXd all_variance_ratio;        ///< d, every component

    int n_components() const { return static_cast<int>(components.rows()); }

    /// Standardizes a raw row and projects it onto the retained components.
    Eigen::VectorXd project(const Eigen::VectorXd& raw) const {
        return components * ((raw - means).array() / scales.array()).matrix();
    }
    Eigen::MatrixXd project_rows(const Eigen::MatrixXd& raw) const {
        const Eigen::MatrixXd z = (raw.rowwise() - means.transpose()).array().rowwise() / scales.transpose().array();
        return z * components.transpose();
    }
    /// Inverse map from component space back to raw coordinates.
    Eigen::VectorXd back_project(const Eigen::VectorXd& embedded) const {
        return means + (components.transpose() * embedded).cwiseProduct(scales);
    }
};

/// PCA of the column-standardized data (means and sample standard deviations
/// stored in the model). Keeps the fewest components whose cumulative
/// explained variance reaches `variance_target`. Each component is signed so
/// its largest-magnitude loading is positive.
inline PcaModel fit_pca(const Eigen::MatrixXd& X, double variance_target = 0.85) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (n <= d) {
        throw DataError("fit_pca: need more rows than columns (n = " + std::to_string(n) + ", d = " + std::to_string(d) + ")");
    }
    if (!(variance_target > 0.0 && variance_target <= 1.0)) {
        throw ConfigError("fit_pca: variance_target must be in (0, 1]");
    }
    PcaModel m;
    m.means = X.colwise().mean().transpose();
    const Eigen::MatrixXd C = X.rowwise() - m.means.transpose();
    m.scales = (C.colwise().squaredNorm() / static_cast<double>(n - 1)).array().sqrt().transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!(m.scales(j) > 0.0)) {
            throw DataError("fit_pca: column " + std::to_string(j) + " has zero variance; standardization is undefined");
        }
    }
    const Eigen::MatrixXd Z = C.array().rowwise() / m.scales.transpose().array();
    const Eigen::MatrixXd cov = (Z.transpose() * Z) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) {
        throw DataError("fit_pca: eigen decomposition failed");
    }
    // Eigen returns ascending eigenvalues.
    Eigen::VectorXd vals = es.eigenvalues().reverse().cwiseMax(0.0);
    Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse();
    const double total = vals.sum();
    m.all_variance_ratio = vals / total;
    int k = 0;
    double cum = 0.0;
    while (k < d) {
        cum += m.all_variance_ratio(k);
        ++k;
        if (cum >= variance_target - 1e-12) {
            break;
        }
    }
    m.components.resize(k, d);
    for (int c = 0; c < k; ++c) {
        Eigen::VectorXd v = vecs.col(c);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) {
            v = -v;
        }
        m.components.row(c) = v.transpose();
    }
    m.explained_variance_ratio = m.all_variance_ratio.head(k);
    return m;
}

struct KMeansResult {
    Eigen::MatrixXd centroids;  ///< k x d
    std::vector<int> assignments;
    double inertia = 0.0;
    int iterations = 0;
    std::vector<double> inertia_history;  ///< after seeding, then after every Lloyd update
};

namespace detail {

inline int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x, double* dist2) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = (centroids.row(c) - x).squaredNorm();
        if (d < bd) {
            bd = d;
            best = static_cast<int>(c);
        }
    }
    if (dist2) {
        *dist2 = bd;
    }
    return best;
}

inline double assign_all(const Eigen::MatrixXd& X, const Eigen::MatrixXd& centroids, std::vector<int>& assign) {
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double d = 0.0;
        assign[static_cast<std::size_t>(i)] = nearest_centroid(centroids, X.row(i), &d);
        inertia += d;
    }
    return inertia;
}

inline double inertia_of(const Eigen::MatrixXd& X, const Eigen::MatrixXd& centroids, const std::vector<int>& assign) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        s += (X.row(i) - centroids.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
    }
    return s;
}

inline Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& X, int k, Rng& rng) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd c(k, X.cols());
    const auto first = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
    c.row(0) = X.row(first);
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        d2[static_cast<std::size_t>(i)] = (X.row(i) - c.row(0)).squaredNorm();
    }
    for (int j = 1; j < k; ++j) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double r = uniform01(rng) * total;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                r -= d2[static_cast<std::size_t>(i)];
                if (r < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
        }
        c.row(j) = X.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) {
            d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], (X.row(i) - c.row(j)).squaredNorm());
        }
    }
    return c;
}

inline KMeansResult lloyd(const Eigen::MatrixXd& X, int k, Rng& rng, int max_iter) {
    const Eigen::Index n = X.rows();
    KMeansResult r;
    r.centroids = kmeanspp_seed(X, k, rng);
    r.assignments.assign(static_cast<std::size_t>(n), -1);
    r.inertia = assign_all(X, r.centroids, r.assignments);
    r.inertia_history.push_back(r.inertia);
    std::vector<int> prev;
    for (int it = 0; it < max_iter; ++it) {
        // Update step, with empty clusters taking the point farthest from its centroid.
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int a = r.assignments[static_cast<std::size_t>(i)];
            sums.row(a) += X.row(i);
            ++counts[static_cast<std::size_t>(a)];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                r.centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
            }
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                continue;
            }
            Eigen::Index far = -1;
            double fd = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int a = r.assignments[static_cast<std::size_t>(i)];
                if (counts[static_cast<std::size_t>(a)] <= 1) {
                    continue;
                }
                const double d = (X.row(i) - r.centroids.row(a)).squaredNorm();
                if (d > fd) {
                    fd = d;
                    far = i;
                }
            }
            if (far < 0) {
                break;
            }
            const int old = r.assignments[static_cast<std::size_t>(far)];
            --counts[static_cast<std::size_t>(old)];
            sums.row(old) -= X.row(far);
            r.centroids.row(old) = sums.row(old) / counts[static_cast<std::size_t>(old)];
            r.assignments[static_cast<std::size_t>(far)] = c;
            counts[static_cast<std::size_t>(c)] = 1;
            sums.row(c) = X.row(far);
            r.centroids.row(c) = X.row(far);
        }
        r.inertia = inertia_of(X, r.centroids, r.assignments);
        r.inertia_history.push_back(r.inertia);
        prev = r.assignments;
        r.inertia = assign_all(X, r.centroids, r.assignments);
        r.inertia_history.push_back(r.inertia);
        r.iterations = it + 1;
        if (r.assignments == prev) {
            break;
        }
    }
    r.inertia = inertia_of(X, r.centroids, r.assignments);
    return r;
}

}  // namespace detail

struct KMeansOptions {
    int max_iterations = 300;
    int n_init = 4;  ///< independent k-means++ restarts; lowest inertia wins
};

/// Lloyd's algorithm from k-means++ seeds. Every restart draws from its own
/// seed-derived stream; runs are bit-deterministic for a given seed.
inline KMeansResult kmeans(const Eigen::MatrixXd& X, int k, std::uint64_t seed, const KMeansOptions& opt = {},
                           std::vector<KMeansResult>* all_runs = nullptr) {
    if (k < 1) {
        throw ConfigError("kmeans: k must be >= 1");
    }
    if (k > X.rows()) {
        throw DataError("kmeans: k = " + std::to_string(k) + " exceeds the number of points (" + std::to_string(X.rows()) + ")");
    }
    KMeansResult best;
    bool have = false;
    for (int run = 0; run < std::max(1, opt.n_init); ++run) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(run)));
        auto r = detail::lloyd(X, k, rng, opt.max_iterations);
        if (!have || r.inertia < best.inertia) {
            best = r;
            have = true;
        }
        if (all_runs) {
            all_runs->push_back(std::move(r));
        }
    }
    return best;
}

/// Mean silhouette over `X` (exact O(n^2)).
inline double mean_silhouette(const Eigen::MatrixXd& X, const std::vector<int>& assign, int k) {
    const Eigen::Index n = X.rows();
    std::vector<int> size(static_cast<std::size_t>(k), 0);
    for (int a : assign) {
        ++size[static_cast<std::size_t>(a)];
    }
    double total = 0.0;
    std::vector<double> dsum(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::fill(dsum.begin(), dsum.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) {
                dsum[static_cast<std::size_t>(assign[static_cast<std::size_t>(j)])] += (X.row(i) - X.row(j)).norm();
            }
        }
        const int own = assign[static_cast<std::size_t>(i)];
        if (size[static_cast<std::size_t>(own)] <= 1) {
            continue;  // silhouette of a singleton is 0
        }
        const double a = dsum[static_cast<std::size_t>(own)] / (size[static_cast<std::size_t>(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c != own && size[static_cast<std::size_t>(c)] > 0) {
                b = std::min(b, dsum[static_cast<std::size_t>(c)] / size[static_cast<std::size_t>(c)]);
            }
        }
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

struct KSelection {
    int k = 2;
    std::vector<std::pair<int, double>> scores;  ///< (k, mean silhouette)
};

/// Picks k in [k_min, k_max] maximizing mean silhouette, evaluated on a seeded
/// subsample of at most `max_points` rows. Ties go to the smaller k.
inline KSelection select_k_by_silhouette(const Eigen::MatrixXd& X, int k_min, int k_max, std::uint64_t seed,
                                         std::size_t max_points = 2000, const KMeansOptions& opt = {}) {
    if (k_min < 2 || k_max < k_min) {
        throw ConfigError("select_k_by_silhouette: need 2 <= k_min <= k_max");
    }
    Eigen::MatrixXd S = X;
    if (static_cast<std::size_t>(X.rows()) > max_points) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(X.rows()));
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng(derive_seed(seed, 0x5111));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(max_points);
        std::sort(idx.begin(), idx.end());
        S.resize(static_cast<Eigen::Index>(max_points), X.cols());
        for (std::size_t i = 0; i < max_points; ++i) {
            S.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
        }
    }
    KSelection sel;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = k_min; k <= k_max && k <= S.rows(); ++k) {
        const auto km = kmeans(S, k, derive_seed(seed, static_cast<std::uint64_t>(k)), opt);
        const double s = mean_silhouette(S, km.assignments, k);
        sel.scores.emplace_back(k, s);
        if (s > best) {
            best = s;
            sel.k = k;
        }
    }
    return sel;
}

struct FormationClusters {
    int k = 0;
    Eigen::MatrixXd centroids;           ///< k x n_components, PCA space
    Eigen::MatrixXd centroid_positions;  ///< k x 10 rink coordinates (back-projected)
    std::vector<int> assignments;
    std::vector<int> member_counts;
    std::vector<double> mean_composite;  ///< empty until select_optimal_cluster
    int optimal_cluster_id = -1;
};

inline FormationClusters make_clusters(const PcaModel& pca, const KMeansResult& km) {
    FormationClusters fc;
    fc.k = static_cast<int>(km.centroids.rows());
    fc.centroids = km.centroids;
    fc.assignments = km.assignments;
    fc.member_counts.assign(static_cast<std::size_t>(fc.k), 0);
    for (int a : km.assignments) {
        ++fc.member_counts[static_cast<std::size_t>(a)];
    }
    fc.centroid_positions.resize(fc.k, pca.means.size());
    for (int c = 0; c < fc.k; ++c) {
        fc.centroid_positions.row(c) = pca.back_project(km.centroids.row(c).transpose()).transpose();
    }
    return fc;
}

/// Mean composite per cluster; the highest mean is the optimal cluster (ties
/// to the lower id).
inline FormationClusters select_optimal_cluster(FormationClusters clusters, std::span<const double> composite) {
    if (composite.size() != clusters.assignments.size()) {
        throw DataError("select_optimal_cluster: need one composite score per clustered window");
    }
    std::vector<double> sum(static_cast<std::size_t>(clusters.k), 0.0);
    std::vector<int> cnt(static_cast<std::size_t>(clusters.k), 0);
    for (std::size_t i = 0; i < composite.size(); ++i) {
        const auto a = static_cast<std::size_t>(clusters.assignments[i]);
        sum[a] += composite[i];
        ++cnt[a];
    }
    clusters.mean_composite.assign(static_cast<std::size_t>(clusters.k), 0.0);
    clusters.optimal_cluster_id = -1;
    for (int c = 0; c < clusters.k; ++c) {
        if (cnt[static_cast<std::size_t>(c)] == 0) {
            throw DataError("select_optimal_cluster: cluster " + std::to_string(c) + " is empty");
        }
        clusters.mean_composite[static_cast<std::size_t>(c)] = sum[static_cast<std::size_t>(c)] / cnt[static_cast<std::size_t>(c)];
        if (clusters.optimal_cluster_id < 0 ||
            clusters.mean_composite[static_cast<std::size_t>(c)] > clusters.mean_composite[static_cast<std::size_t>(clusters.optimal_cluster_id)]) {
            clusters.optimal_cluster_id = c;
        }
    }
    return clusters;
}

/// Mean over the five roles of the Euclidean distance between a window's
/// role positions and the centroid's role positions.
inline double deviation(std::span<const double> window_positions, std::span<const double> centroid_positions) {
    if (window_positions.size() != static_cast<std::size_t>(kPositionDims) || centroid_positions.size() != static_cast<std::size_t>(kPositionDims)) {
        throw DataError("deviation: position vectors must have 10 entries");
    }
    double s = 0.0;
    for (int r = 0; r < kTrackedRoles; ++r) {
        const double wx = window_positions[static_cast<std::size_t>(2 * r)];
        const double wy = window_positions[static_cast<std::size_t>(2 * r + 1)];
        if (!std::isfinite(wx) || !std::isfinite(wy)) {
            throw DataError("deviation: role " + std::string(role_name(static_cast<Role>(r))) + " is missing");
        }
        s += std::hypot(wx - centroid_positions[static_cast<std::size_t>(2 * r)], wy - centroid_positions[static_cast<std::size_t>(2 * r + 1)]);
    }
    return s / kTrackedRoles;
}

inline double deviation(const WindowFeatures& w, std::span<const double> centroid_positions) {
    if (!w.has_full_positions()) {
        throw DataError("deviation: window " + w.window_id + " lacks a full set of role positions");
    }
    return deviation(std::span<const double>(w.positions), centroid_positions);
}

/// Flags values at or below the nearest-rank `q` percentile.
inline std::vector<bool> lowest_percentile_flags(std::span<const double> values, double q = 0.25) {
    std::vector<bool> out(values.size(), false);
    if (values.empty()) {
        return out;
    }
    const double cut = nearest_rank(std::vector<double>(values.begin(), values.end()), q);
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = values[i] <= cut;
    }
    return out;
}

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Convex hull by Andrew's monotone chain, counter-clockwise, without
/// collinear points.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x == b.x && a.y == b.y; }), pts.end());
    if (pts.size() < 3) {
        return pts;
    }
    auto cross = [](const Point2& o, const Point2& a, const Point2& b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); };
    std::vector<Point2> h(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0.0) {
            --k;
        }
        h[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0.0) {
            --k;
        }
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

/// Shoelace area of the convex hull; 0 when all points are collinear.
inline double convex_hull_area(const std::vector<Point2>& points) {
    if (points.size() < 3) {
        throw DataError("convex_hull_area: need at least 3 points");
    }
    const auto h = convex_hull(points);
    if (h.size() < 3) {
        return 0.0;
    }
    double a = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto& p = h[i];
        const auto& q = h[(i + 1) % h.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return std::abs(a) * 0.5;
}

/// All role positions of the given windows as a point cloud.
inline std::vector<Point2> role_points(const std::vector<WindowFeatures>& windows, std::span<const std::size_t> which) {
    std::vector<Point2> pts;
    pts.reserve(which.size() * kTrackedRoles);
    for (std::size_t i : which) {
        const auto& w = windows[i];
        for (int r = 0; r < kTrackedRoles; ++r) {
            if (w.role_present[static_cast<std::size_t>(r)]) {
                pts.push_back({w.positions[static_cast<std::size_t>(2 * r)], w.positions[static_cast<std::size_t>(2 * r + 1)]});
            }
        }
    }
    return pts;
}

/// The five role points of one formation vector.
inline std::vector<Point2> formation_points(std::span<const double> positions) {
    std::vector<Point2> pts;
    for (int r = 0; r < kTrackedRoles; ++r) {
        pts.push_back({positions[static_cast<std::size_t>(2 * r)], positions[static_cast<std::size_t>(2 * r + 1)]});
    }
    return pts;
}

/// Per-role mean positions over windows in the lowest momentum quartile
/// (nearest rank). Windows lacking a role do not contribute to that role.
inline std::array<double, kPositionDims> defensive_positions(const std::vector<WindowFeatures>& windows, std::span<const double> momentum) {
    if (windows.size() != momentum.size()) {
        throw DataError("defensive_positions: need one momentum score per window");
    }
    const auto flags = lowest_percentile_flags(momentum, 0.25);
    std::array<double, kPositionDims> sum{};
    std::array<int, kTrackedRoles> cnt{};
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (!flags[i]) {
            continue;
        }
        for (int r = 0; r < kTrackedRoles; ++r) {
            if (windows[i].role_present[static_cast<std::size_t>(r)]) {
                sum[static_cast<std::size_t>(2 * r)] += windows[i].positions[static_cast<std::size_t>(2 * r)];
                sum[static_cast<std::size_t>(2 * r + 1)] += windows[i].positions[static_cast<std::size_t>(2 * r + 1)];
                ++cnt[static_cast<std::size_t>(r)];
            }
        }
    }
    std::array<double, kPositionDims> out{};
    for (int r = 0; r < kTrackedRoles; ++r) {
        const int c = cnt[static_cast<std::size_t>(r)];
        out[static_cast<std::size_t>(2 * r)] = c ? sum[static_cast<std::size_t>(2 * r)] / c : std::numeric_limits<double>::quiet_NaN();
        out[static_cast<std::size_t>(2 * r + 1)] = c ? sum[static_cast<std::size_t>(2 * r + 1)] / c : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

/// 2-D occupancy histogram over the offensive zone (x in [25, 100],
/// y in [-42.5, 42.5]); points outside are ignored.
struct DensityGrid {
    int bins_x = 50;
    int bins_y = 50;
    double x_min = 25.0;
    double x_max = 100.0;
    double y_min = -42.5;
    double y_max = 42.5;
    std::vector<double> counts;  ///< row-major [ix * bins_y + iy]

    void add(const Point2& p) {
        if (counts.empty()) {
            counts.assign(static_cast<std::size_t>(bins_x * bins_y), 0.0);
        }
        if (p.x < x_min || p.x >= x_max || p.y < y_min || p.y >= y_max) {
            return;
        }
        const int ix = std::min(bins_x - 1, static_cast<int>((p.x - x_min) / (x_max - x_min) * bins_x));
        const int iy = std::min(bins_y - 1, static_cast<int>((p.y - y_min) / (y_max - y_min) * bins_y));
        counts[static_cast<std::size_t>(ix * bins_y + iy)] += 1.0;
    }

    std::string to_csv() const {
        std::string s = "x_lo,x_hi,y_lo,y_hi,count\n";
        const double dx = (x_max - x_min) / bins_x;
        const double dy = (y_max - y_min) / bins_y;
        char buf[160];
        for (int ix = 0; ix < bins_x; ++ix) {
            for (int iy = 0; iy < bins_y; ++iy) {
                const double c = counts.empty() ? 0.0 : counts[static_cast<std::size_t>(ix * bins_y + iy)];
                std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f,%.0f\n", x_min + ix * dx, x_min + (ix + 1) * dx, y_min + iy * dy, y_min + (iy + 1) * dy, c);
                s += buf;
            }
        }
        return s;
    }
};

namespace detail {
inline nlohmann::ordered_json vec_json(const Eigen::VectorXd& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v(i));
    }
    return a;
}
inline nlohmann::ordered_json rows_json(const Eigen::MatrixXd& m) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        a.push_back(vec_json(m.row(r).transpose()));
    }
    return a;
}
}  // namespace detail

inline nlohmann::ordered_json to_json(const PcaModel& m) {
    return {{"means", detail::vec_json(m.means)},
            {"scales", detail::vec_json(m.scales)},
            {"components", detail::rows_json(m.components)},
            {"explained_variance_ratio", detail::vec_json(m.explained_variance_ratio)},
            {"all_variance_ratio", detail::vec_json(m.all_variance_ratio)}};
}

inline nlohmann::ordered_json to_json(const FormationClusters& c) {
    nlohmann::ordered_json j;
    j["k"] = c.k;
    j["optimal_cluster_id"] = c.optimal_cluster_id;
    auto& arr = j["clusters"] = nlohmann::ordered_json::array();
    for (int k = 0; k < c.k; ++k) {
        nlohmann::ordered_json roles = nlohmann::ordered_json::object();
        for (int r = 0; r < kTrackedRoles; ++r) {
            roles[std::string(role_name(static_cast<Role>(r)))] = {c.centroid_positions(k, 2 * r), c.centroid_positions(k, 2 * r + 1)};
        }
        arr.push_back({{"id", k},
                       {"member_count", c.member_counts[static_cast<std::size_t>(k)]},
                       {"mean_composite", c.mean_composite.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(c.mean_composite[static_cast<std::size_t>(k)])},
                       {"centroid_pca", detail::vec_json(c.centroids.row(k).transpose())},
                       {"centroid_positions", roles}});
    }
    return j;
}

}  // namespace mxg
