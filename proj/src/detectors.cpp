#include "relgate/detectors.hpp"

#include "relgate/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace relgate {

namespace {

constexpr double kStdEpsilon = 1e-12;
constexpr double kLrdDelta = 1e-12; // guards duplicate-point degeneracy

double euclidean(const FeatureMatrix& m, std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) {
        double d = m.at(a, c) - m.at(b, c);
        s += d * d;
    }
    return std::sqrt(s);
}

double euclidean_to_point(const FeatureMatrix& m, std::size_t row,
                          const std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) {
        double d = m.at(row, c) - q[c];
        s += d * d;
    }
    return std::sqrt(s);
}

void require_k(const FeatureMatrix& m, std::size_t k) {
    if (m.rows < 2 || k < 1 || k > m.rows - 1) {
        throw ConfigError("k_neighbors = " + std::to_string(k) +
                          " out of range for n = " + std::to_string(m.rows));
    }
}

double column_median(const FeatureMatrix& m, std::size_t col) {
    std::vector<double> v(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) v[r] = m.at(r, col);
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

FeatureMatrix FeatureMatrix::zeros(std::size_t rows, std::size_t cols) {
    FeatureMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.values.assign(rows * cols, 0.0);
    m.row_ids.resize(rows);
    std::iota(m.row_ids.begin(), m.row_ids.end(), 0);
    return m;
}

void FeatureMatrix::validate() const {
    if (values.size() != rows * cols) {
        throw ValidationError("feature matrix storage does not match its dimensions");
    }
    if (row_ids.size() != rows) {
        throw ValidationError("feature matrix row_ids must align with rows");
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw ValidationError("feature matrix contains a non-finite value");
        }
    }
}

const char* detector_name(DetectorKind kind) {
    switch (kind) {
    case DetectorKind::lof: return "lof";
    case DetectorKind::knn: return "knn";
    case DetectorKind::mahalanobis: return "mahalanobis";
    case DetectorKind::iforest: return "iforest";
    }
    return "?";
}

void DetectorConfig::validate() const {
    if (k_neighbors < 1) throw ConfigError("k_neighbors must be positive");
    if (!(review_threshold < anomaly_threshold)) {
        throw ConfigError("review_threshold must be below anomaly_threshold");
    }
    if (tree_count < 1) throw ConfigError("tree_count must be positive");
    if (subsample_size < 2) throw ConfigError("subsample_size must be at least 2");
    if (!(covariance_ridge > 0.0)) throw ConfigError("covariance_ridge must be positive");
}

std::pair<FeatureMatrix, std::vector<std::size_t>>
screen_features(const FeatureMatrix& matrix, std::size_t min_distinct) {
    matrix.validate();
    std::vector<std::size_t> kept;
    for (std::size_t c = 0; c < matrix.cols; ++c) {
        std::vector<double> v(matrix.rows);
        for (std::size_t r = 0; r < matrix.rows; ++r) v[r] = matrix.at(r, c);
        std::sort(v.begin(), v.end());
        std::size_t distinct = std::unique(v.begin(), v.end()) - v.begin();
        if (distinct >= min_distinct) kept.push_back(c);
    }
    FeatureMatrix out;
    out.rows = matrix.rows;
    out.cols = kept.size();
    out.row_ids = matrix.row_ids;
    out.values.reserve(out.rows * out.cols);
    for (std::size_t r = 0; r < matrix.rows; ++r) {
        for (std::size_t c : kept) out.values.push_back(matrix.at(r, c));
    }
    return {std::move(out), std::move(kept)};
}

std::pair<FeatureMatrix, StandardizationParams> standardize(const FeatureMatrix& matrix) {
    matrix.validate();
    if (matrix.rows < 2) throw ValidationError("standardize needs at least 2 rows");

    StandardizationParams params;
    params.means.resize(matrix.cols);
    params.stds.resize(matrix.cols);
    for (std::size_t c = 0; c < matrix.cols; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < matrix.rows; ++r) mean += matrix.at(r, c);
        mean /= double(matrix.rows);
        double var = 0.0;
        for (std::size_t r = 0; r < matrix.rows; ++r) {
            double d = matrix.at(r, c) - mean;
            var += d * d;
        }
        var /= double(matrix.rows); // population variance
        params.means[c] = mean;
        params.stds[c] = std::sqrt(var);
        if (params.stds[c] > kStdEpsilon) params.kept_features.push_back(c);
    }
    if (params.kept_features.empty()) {
        throw NoVarianceError("no feature has variance; cannot standardize");
    }

    FeatureMatrix out;
    out.rows = matrix.rows;
    out.cols = params.kept_features.size();
    out.row_ids = matrix.row_ids;
    out.values.reserve(out.rows * out.cols);
    for (std::size_t r = 0; r < matrix.rows; ++r) {
        for (std::size_t c : params.kept_features) {
            out.values.push_back((matrix.at(r, c) - params.means[c]) / params.stds[c]);
        }
    }
    return {std::move(out), std::move(params)};
}

std::pair<double, std::set<std::size_t>>
k_distance_neighbors(const FeatureMatrix& matrix, std::size_t i, std::size_t k) {
    require_k(matrix, k);
    std::vector<double> dist;
    dist.reserve(matrix.rows - 1);
    for (std::size_t j = 0; j < matrix.rows; ++j) {
        if (j != i) dist.push_back(euclidean(matrix, i, j));
    }
    std::nth_element(dist.begin(), dist.begin() + std::ptrdiff_t(k - 1), dist.end());
    double k_dist = dist[k - 1];

    std::set<std::size_t> neighbors;
    for (std::size_t j = 0; j < matrix.rows; ++j) {
        if (j != i && euclidean(matrix, i, j) <= k_dist) neighbors.insert(j);
    }
    return {k_dist, std::move(neighbors)};
}

namespace {

struct LofFit {
    FeatureMatrix data;
    std::size_t k = 0;
    std::vector<double> k_dist;
    std::vector<std::vector<std::size_t>> neighbors; // ascending row index
    std::vector<double> lrd;
};

LofFit fit_lof(const FeatureMatrix& matrix, std::size_t k) {
    matrix.validate();
    require_k(matrix, k);
    const std::size_t n = matrix.rows;

    LofFit fit;
    fit.data = matrix;
    fit.k = k;
    fit.k_dist.resize(n);
    fit.neighbors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto [kd, nb] = k_distance_neighbors(matrix, i, k);
        fit.k_dist[i] = kd;
        fit.neighbors[i].assign(nb.begin(), nb.end());
    }
    fit.lrd.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j : fit.neighbors[i]) {
            sum += std::max(fit.k_dist[j], euclidean(matrix, i, j));
        }
        double mean = sum / double(fit.neighbors[i].size());
        fit.lrd[i] = 1.0 / (mean + kLrdDelta);
    }
    return fit;
}

double lof_of_row(const LofFit& fit, std::size_t i) {
    double sum = 0.0;
    for (std::size_t j : fit.neighbors[i]) sum += fit.lrd[j];
    return (sum / double(fit.neighbors[i].size())) / fit.lrd[i];
}

/// LOF of an arbitrary query point against the fitted dataset, using the
/// fitted k-distances and lrd values.
double lof_of_query(const LofFit& fit, const std::vector<double>& q) {
    const std::size_t n = fit.data.rows;
    std::vector<double> dist(n);
    for (std::size_t j = 0; j < n; ++j) dist[j] = euclidean_to_point(fit.data, j, q);

    std::vector<double> sorted = dist;
    std::nth_element(sorted.begin(), sorted.begin() + std::ptrdiff_t(fit.k - 1),
                     sorted.end());
    double k_dist = sorted[fit.k - 1];

    double reach_sum = 0.0, lrd_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (dist[j] <= k_dist) {
            reach_sum += std::max(fit.k_dist[j], dist[j]);
            lrd_sum += fit.lrd[j];
            ++count;
        }
    }
    double lrd_q = 1.0 / (reach_sum / double(count) + kLrdDelta);
    return (lrd_sum / double(count)) / lrd_q;
}

} // namespace

ScoreVector lof_scores(const FeatureMatrix& matrix, std::size_t k) {
    if (matrix.rows < 3) throw ValidationError("lof_scores needs at least 3 rows");
    LofFit fit = fit_lof(matrix, k);
    ScoreVector out;
    out.detector_name = "lof";
    out.row_ids = matrix.row_ids;
    out.scores.resize(matrix.rows);
    for (std::size_t i = 0; i < matrix.rows; ++i) out.scores[i] = lof_of_row(fit, i);
    return out;
}

ScoreVector knn_outlier_scores(const FeatureMatrix& matrix, std::size_t k) {
    matrix.validate();
    require_k(matrix, k);
    ScoreVector out;
    out.detector_name = "knn";
    out.row_ids = matrix.row_ids;
    out.scores.resize(matrix.rows);
    for (std::size_t i = 0; i < matrix.rows; ++i) {
        std::vector<double> dist;
        dist.reserve(matrix.rows - 1);
        for (std::size_t j = 0; j < matrix.rows; ++j) {
            if (j != i) dist.push_back(euclidean(matrix, i, j));
        }
        std::partial_sort(dist.begin(), dist.begin() + std::ptrdiff_t(k), dist.end());
        double sum = 0.0;
        for (std::size_t m = 0; m < k; ++m) sum += dist[m];
        out.scores[i] = sum / double(k);
    }
    return out;
}

ScoreVector mahalanobis_scores(const FeatureMatrix& matrix, double ridge) {
    matrix.validate();
    if (!(ridge > 0.0)) throw ConfigError("mahalanobis ridge must be positive");
    if (matrix.rows < 2) throw ValidationError("mahalanobis needs at least 2 rows");

    const auto n = Eigen::Index(matrix.rows);
    const auto d = Eigen::Index(matrix.cols);
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) X(r, c) = matrix.at(r, c);
    }
    Eigen::RowVectorXd mu = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - mu;
    Eigen::MatrixXd cov =
        centered.transpose() * centered / double(n - 1) +
        ridge * Eigen::MatrixXd::Identity(d, d);
    Eigen::LDLT<Eigen::MatrixXd> solver(cov);

    ScoreVector out;
    out.detector_name = "mahalanobis";
    out.row_ids = matrix.row_ids;
    out.scores.resize(matrix.rows);
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::VectorXd diff = centered.row(r).transpose();
        out.scores[std::size_t(r)] = std::sqrt(diff.dot(solver.solve(diff)));
    }
    return out;
}

namespace detail {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                           std::uint64_t c) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(a));
    h = splitmix64(h ^ splitmix64(b));
    return splitmix64(h ^ splitmix64(c));
}

double to_unit_interval(std::uint64_t h) {
    return double(h >> 11) * 0x1.0p-53;
}

} // namespace detail

namespace {

struct IsoNode {
    bool leaf = false;
    std::size_t size = 0;      // leaf only
    std::size_t feature = 0;   // internal only
    double split = 0.0;        // internal only
    std::size_t left = 0, right = 0;
};

struct IsoTree {
    std::vector<IsoNode> nodes;
    std::size_t root = 0;
};

double harmonic(std::size_t n) {
    double h = 0.0;
    for (std::size_t i = 1; i <= n; ++i) h += 1.0 / double(i);
    return h;
}

double avg_path_length(std::size_t m) {
    if (m <= 1) return 0.0;
    if (m == 2) return 1.0;
    return 2.0 * harmonic(m - 1) - 2.0 * double(m - 1) / double(m);
}

/// Builds the subtree over `points`, keyed by (seed, tree, node path) so the
/// structure depends only on the point set, never on row order.
std::size_t build_iso_node(IsoTree& tree, const FeatureMatrix& m,
                           std::vector<std::size_t>& points, std::size_t depth,
                           std::size_t height_limit, std::uint64_t seed,
                           std::uint64_t tree_index, std::uint64_t path) {
    auto make_leaf = [&](std::size_t size) {
        tree.nodes.push_back(IsoNode{true, size, 0, 0.0, 0, 0});
        return tree.nodes.size() - 1;
    };
    if (points.size() <= 1 || depth >= height_limit) return make_leaf(points.size());

    // Splittable features: positive spread over the node's points.
    std::vector<std::size_t> candidates;
    std::vector<std::pair<double, double>> ranges(m.cols);
    for (std::size_t c = 0; c < m.cols; ++c) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t p : points) {
            lo = std::min(lo, m.at(p, c));
            hi = std::max(hi, m.at(p, c));
        }
        ranges[c] = {lo, hi};
        if (hi > lo) candidates.push_back(c);
    }
    if (candidates.empty()) return make_leaf(points.size());

    std::uint64_t hf = detail::hash_combine(seed, tree_index, path, 0);
    std::size_t feature = candidates[hf % candidates.size()];
    auto [lo, hi] = ranges[feature];
    double u = detail::to_unit_interval(detail::hash_combine(seed, tree_index, path, 1));
    double split = lo + u * (hi - lo);

    std::vector<std::size_t> left_pts, right_pts;
    for (std::size_t p : points) {
        (m.at(p, feature) < split ? left_pts : right_pts).push_back(p);
    }
    if (left_pts.empty() || right_pts.empty()) return make_leaf(points.size());

    std::size_t left = build_iso_node(tree, m, left_pts, depth + 1, height_limit, seed,
                                      tree_index, path * 2);
    std::size_t right = build_iso_node(tree, m, right_pts, depth + 1, height_limit, seed,
                                       tree_index, path * 2 + 1);
    tree.nodes.push_back(IsoNode{false, 0, feature, split, left, right});
    return tree.nodes.size() - 1;
}

double iso_path_length(const IsoTree& tree, const FeatureMatrix& m, std::size_t row) {
    std::size_t node = tree.root;
    double depth = 0.0;
    while (!tree.nodes[node].leaf) {
        const IsoNode& nd = tree.nodes[node];
        node = m.at(row, nd.feature) < nd.split ? nd.left : nd.right;
        depth += 1.0;
    }
    return depth + avg_path_length(tree.nodes[node].size);
}

double iso_path_length_query(const IsoTree& tree, const std::vector<double>& q) {
    std::size_t node = tree.root;
    double depth = 0.0;
    while (!tree.nodes[node].leaf) {
        const IsoNode& nd = tree.nodes[node];
        node = q[nd.feature] < nd.split ? nd.left : nd.right;
        depth += 1.0;
    }
    return depth + avg_path_length(tree.nodes[node].size);
}

struct IsoForest {
    std::vector<IsoTree> trees;
    double normalizer = 1.0; // c(m)
};

IsoForest fit_iforest(const FeatureMatrix& matrix, std::size_t tree_count,
                      std::size_t subsample_size, std::uint64_t seed) {
    matrix.validate();
    if (subsample_size < 2) throw ConfigError("subsample_size must be at least 2");
    if (tree_count < 1) throw ConfigError("tree_count must be positive");

    const std::size_t n = matrix.rows;
    const std::size_t m = std::min(subsample_size, n);
    const std::size_t height_limit =
        std::size_t(std::ceil(std::log2(double(std::max<std::size_t>(m, 2)))));

    IsoForest forest;
    forest.normalizer = std::max(avg_path_length(m), 1e-12);
    forest.trees.reserve(tree_count);
    for (std::size_t t = 0; t < tree_count; ++t) {
        // Subsample the m rows with the smallest id-keyed hashes; row order
        // never enters the draw.
        std::vector<std::pair<std::uint64_t, std::size_t>> keyed(n);
        for (std::size_t r = 0; r < n; ++r) {
            keyed[r] = {detail::hash_combine(seed, t, std::uint64_t(matrix.row_ids[r]), 2),
                        r};
        }
        std::sort(keyed.begin(), keyed.end());
        std::vector<std::size_t> points(m);
        for (std::size_t i = 0; i < m; ++i) points[i] = keyed[i].second;
        std::sort(points.begin(), points.end());

        IsoTree tree;
        tree.root = build_iso_node(tree, matrix, points, 0, height_limit, seed, t, 1);
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

} // namespace

ScoreVector isolation_forest_scores(const FeatureMatrix& matrix, std::size_t tree_count,
                                    std::size_t subsample_size, std::uint64_t seed) {
    IsoForest forest = fit_iforest(matrix, tree_count, subsample_size, seed);
    ScoreVector out;
    out.detector_name = "iforest";
    out.row_ids = matrix.row_ids;
    out.scores.resize(matrix.rows);
    for (std::size_t r = 0; r < matrix.rows; ++r) {
        double sum = 0.0;
        for (const IsoTree& tree : forest.trees) {
            sum += iso_path_length(tree, matrix, r);
        }
        double mean_path = sum / double(forest.trees.size());
        out.scores[r] = std::exp2(-mean_path / forest.normalizer);
    }
    return out;
}

Severity classify(double score, const DetectorConfig& config) {
    config.validate();
    if (score > config.anomaly_threshold) return Severity::anomaly;
    if (score > config.review_threshold) return Severity::review;
    return Severity::ok;
}

std::vector<Severity> classify(const ScoreVector& scores, const DetectorConfig& config) {
    std::vector<Severity> out;
    out.reserve(scores.scores.size());
    for (double s : scores.scores) out.push_back(classify(s, config));
    return out;
}

BoundaryGrid decision_boundary_grid(DetectorKind detector, const FeatureMatrix& matrix,
                                    std::size_t feature_x, std::size_t feature_y,
                                    std::size_t resolution, const DetectorConfig& config) {
    matrix.validate();
    config.validate();
    if (matrix.rows < 2) throw ValidationError("boundary grid needs at least 2 rows");
    if (feature_x >= matrix.cols || feature_y >= matrix.cols) {
        throw ConfigError("boundary grid feature index out of range");
    }
    if (feature_x == feature_y) throw ConfigError("boundary grid features must differ");
    if (resolution < 2) throw ConfigError("boundary grid resolution must be at least 2");

    auto axis = [&](std::size_t col) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < matrix.rows; ++r) {
            lo = std::min(lo, matrix.at(r, col));
            hi = std::max(hi, matrix.at(r, col));
        }
        double pad = 0.10 * (hi - lo);
        lo -= pad;
        hi += pad;
        std::vector<double> ticks(resolution);
        for (std::size_t i = 0; i < resolution; ++i) {
            ticks[i] = lo + (hi - lo) * double(i) / double(resolution - 1);
        }
        return ticks;
    };

    BoundaryGrid grid;
    grid.resolution = resolution;
    grid.xs = axis(feature_x);
    grid.ys = axis(feature_y);
    grid.scores.resize(resolution * resolution);

    std::vector<double> base(matrix.cols);
    for (std::size_t c = 0; c < matrix.cols; ++c) base[c] = column_median(matrix, c);

    std::size_t k = std::min(config.k_neighbors, matrix.rows - 1);

    // Fit once, query every grid point.
    LofFit lof;
    IsoForest forest;
    Eigen::RowVectorXd mu;
    Eigen::LDLT<Eigen::MatrixXd> maha;
    switch (detector) {
    case DetectorKind::lof:
        lof = fit_lof(matrix, k);
        break;
    case DetectorKind::knn:
        break;
    case DetectorKind::mahalanobis: {
        const auto n = Eigen::Index(matrix.rows);
        const auto d = Eigen::Index(matrix.cols);
        Eigen::MatrixXd X(n, d);
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < d; ++c) X(r, c) = matrix.at(r, c);
        }
        mu = X.colwise().mean();
        Eigen::MatrixXd centered = X.rowwise() - mu;
        maha.compute(centered.transpose() * centered / double(n - 1) +
                     config.covariance_ridge * Eigen::MatrixXd::Identity(d, d));
        break;
    }
    case DetectorKind::iforest:
        forest = fit_iforest(matrix, config.tree_count, config.subsample_size,
                             config.rng_seed);
        break;
    }

    auto score_query = [&](const std::vector<double>& q) -> double {
        switch (detector) {
        case DetectorKind::lof:
            return lof_of_query(lof, q);
        case DetectorKind::knn: {
            std::vector<double> dist(matrix.rows);
            for (std::size_t r = 0; r < matrix.rows; ++r) {
                dist[r] = euclidean_to_point(matrix, r, q);
            }
            std::partial_sort(dist.begin(), dist.begin() + std::ptrdiff_t(k), dist.end());
            double sum = 0.0;
            for (std::size_t i = 0; i < k; ++i) sum += dist[i];
            return sum / double(k);
        }
        case DetectorKind::mahalanobis: {
            Eigen::VectorXd diff(Eigen::Index(matrix.cols));
            for (std::size_t c = 0; c < matrix.cols; ++c) {
                diff(Eigen::Index(c)) = q[c] - mu(Eigen::Index(c));
            }
            return std::sqrt(diff.dot(maha.solve(diff)));
        }
        case DetectorKind::iforest: {
            double sum = 0.0;
            for (const IsoTree& tree : forest.trees) {
                sum += iso_path_length_query(tree, q);
            }
            return std::exp2(-(sum / double(forest.trees.size())) / forest.normalizer);
        }
        }
        return 0.0;
    };

    std::vector<double> q = base;
    for (std::size_t iy = 0; iy < resolution; ++iy) {
        for (std::size_t ix = 0; ix < resolution; ++ix) {
            q = base;
            q[feature_x] = grid.xs[ix];
            q[feature_y] = grid.ys[iy];
            grid.scores[iy * resolution + ix] = score_query(q);
        }
    }
    return grid;
}

} // namespace relgate
