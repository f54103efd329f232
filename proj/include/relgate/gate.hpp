#pragma once

#include "relgate/dataset.hpp"
#include "relgate/detectors.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace relgate {

enum class Verdict { pass, review, anomaly, insufficient_history };

std::string verdict_name(Verdict v);

enum class EnsembleMode { lof_only, majority_vote };

struct GateConfig {
    std::size_t warmup_releases = 10;
    DetectorConfig detector;
    EnsembleMode ensemble_mode = EnsembleMode::lof_only;
    std::size_t ensemble_quorum = 2;
    /// Score quantile above which a baseline detector votes the candidate
    /// anomalous under majority_vote (LOF keeps its configured thresholds).
    double contamination = 0.1;

    void validate() const;
};

/// One feature of the candidate, ranked by how far it sits from the history.
struct ExplanationEntry {
    std::string feature;
    double z = 0.0;
    int rank = 0;
};

struct GateDecision {
    Verdict verdict = Verdict::pass;
    int candidate_id = 0;
    std::map<std::string, double> per_detector_scores; // candidate's scores
    std::optional<double> lof_score;
    std::vector<ExplanationEntry> explanation;
    std::size_t history_size = 0;
    std::string reason; // set for degenerate-history / no-activity reviews
    ReleaseRecord flagged_candidate; // candidate copy with FLAG = verdict
};

/// Candidate z-values for every kept feature, sorted by |z| descending (ties
/// by feature index). `feature_names` name the columns of the matrix that was
/// standardized into `standardized`.
std::vector<ExplanationEntry> explain(const FeatureMatrix& standardized,
                                      const StandardizationParams& params,
                                      std::size_t candidate_row,
                                      const std::vector<std::string>& feature_names);

/// The release-gate decision: fit the detectors on history plus candidate and
/// classify the candidate. During warmup (history smaller than
/// warmup_releases) no detection runs and the verdict is insufficient_history.
GateDecision gate_check(const ReleaseDataset& history, const ReleaseRecord& candidate,
                        const GateConfig& config);

/// P1..P6 rows for a span of releases, row_ids = release ids.
FeatureMatrix to_feature_matrix(const std::vector<ReleaseRecord>& records);

} // namespace relgate
