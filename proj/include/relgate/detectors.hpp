#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace relgate {

/// Dense row-major observation matrix. row_ids carry the release ids so that
/// scores stay attributable after reordering or subsetting.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values; // row-major, rows*cols
    std::vector<int> row_ids;   // size == rows

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }

    static FeatureMatrix zeros(std::size_t rows, std::size_t cols);

    /// Throws ValidationError on NaN/infinite entries or row_ids mismatch.
    void validate() const;
};

/// Column statistics captured by standardize(). kept_features indexes the
/// input columns whose std exceeded epsilon, in ascending order; means/stds
/// cover every input column.
struct StandardizationParams {
    std::vector<double> means;
    std::vector<double> stds;
    std::vector<std::size_t> kept_features;
};

struct DetectorConfig {
    std::size_t k_neighbors = 20;     // LOF and kNN; clamped to n-1 at fit time
    double anomaly_threshold = 1.5;   // LOF units
    double review_threshold = 1.2;    // LOF units, < anomaly_threshold
    std::size_t tree_count = 100;     // isolation forest
    std::size_t subsample_size = 256; // isolation forest, clamped to n
    std::uint64_t rng_seed = 42;
    double covariance_ridge = 1e-6;   // Mahalanobis regularizer
    std::size_t min_distinct = 3;     // pipeline feature screening, see screen_features

    /// Throws ConfigError on inconsistent thresholds or zero sizes.
    void validate() const;
};

/// Per-row outlier scores; larger means more anomalous. LOF scores are the
/// ordinary LOF values, ~1 for inliers.
struct ScoreVector {
    std::string detector_name;
    std::vector<double> scores;
    std::vector<int> row_ids;
};

enum class Severity { ok, review, anomaly };

enum class DetectorKind { lof, knn, mahalanobis, iforest };

const char* detector_name(DetectorKind kind);

/// Drops columns with fewer than min_distinct distinct values and returns the
/// surviving original column indices. A column that only ever takes one or
/// two values (P6 in practice) carries no usable density information but,
/// once z-scored, can dominate every distance.
std::pair<FeatureMatrix, std::vector<std::size_t>>
screen_features(const FeatureMatrix& matrix, std::size_t min_distinct);

/// Z-scores each column (population std); columns with std <= 1e-12 are
/// dropped. Throws NoVarianceError when nothing survives.
std::pair<FeatureMatrix, StandardizationParams> standardize(const FeatureMatrix& matrix);

/// Distance to the k-th nearest other row and every row within that distance
/// (ties included, so the set may exceed k).
std::pair<double, std::set<std::size_t>>
k_distance_neighbors(const FeatureMatrix& matrix, std::size_t i, std::size_t k);

ScoreVector lof_scores(const FeatureMatrix& matrix, std::size_t k);

/// Mean distance to the k nearest neighbors.
ScoreVector knn_outlier_scores(const FeatureMatrix& matrix, std::size_t k);

/// sqrt((x-mu)^T (Sigma + ridge I)^-1 (x-mu)) with sample mean and covariance.
ScoreVector mahalanobis_scores(const FeatureMatrix& matrix, double ridge);

/// Seeded, order-independent isolation forest: subsamples are keyed by row id
/// and splits by a counter-based generator, so equal seeds give equal scores
/// regardless of row order or platform.
ScoreVector isolation_forest_scores(const FeatureMatrix& matrix, std::size_t tree_count,
                                    std::size_t subsample_size, std::uint64_t seed);

Severity classify(double score, const DetectorConfig& config);
std::vector<Severity> classify(const ScoreVector& scores, const DetectorConfig& config);

/// Score grid for decision-boundary plots: resolution x resolution points
/// spanning [min-10%, max+10%] of the two chosen columns, other columns
/// pinned at their medians, every point scored as a query against the fit on
/// `matrix`.
struct BoundaryGrid {
    std::size_t resolution = 0;
    std::vector<double> xs;     // size resolution
    std::vector<double> ys;     // size resolution
    std::vector<double> scores; // row-major [iy][ix]

    double score_at(std::size_t ix, std::size_t iy) const {
        return scores[iy * resolution + ix];
    }
};

BoundaryGrid decision_boundary_grid(DetectorKind detector, const FeatureMatrix& matrix,
                                    std::size_t feature_x, std::size_t feature_y,
                                    std::size_t resolution, const DetectorConfig& config);

namespace detail {

/// SplitMix64: the one integer mixer behind every seeded choice in this
/// module. Pure arithmetic, hence bit-identical everywhere.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                           std::uint64_t c);
double to_unit_interval(std::uint64_t h); // [0, 1)

} // namespace detail

} // namespace relgate
