#include "relgate/gate.hpp"

#include "relgate/errors.hpp"

#include <algorithm>
#include <cmath>

namespace relgate {

std::string verdict_name(Verdict v) {
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::review: return "review";
    case Verdict::anomaly: return "anomaly";
    case Verdict::insufficient_history: return "insufficient_history";
    }
    return "?";
}

void GateConfig::validate() const {
    detector.validate();
    if (warmup_releases < 1) throw ConfigError("warmup_releases must be positive");
    if (ensemble_quorum < 1 || ensemble_quorum > 4) {
        throw ConfigError("ensemble_quorum must be between 1 and the 4 enabled detectors");
    }
    if (!(contamination > 0.0 && contamination < 1.0)) {
        throw ConfigError("contamination must lie in (0, 1)");
    }
}

FeatureMatrix to_feature_matrix(const std::vector<ReleaseRecord>& records) {
    FeatureMatrix m;
    m.rows = records.size();
    m.cols = kFeatureCount;
    m.values.reserve(m.rows * m.cols);
    m.row_ids.reserve(m.rows);
    for (const auto& rec : records) {
        m.row_ids.push_back(rec.id);
        for (double v : rec.p) m.values.push_back(v);
    }
    return m;
}

std::vector<ExplanationEntry> explain(const FeatureMatrix& standardized,
                                      const StandardizationParams& params,
                                      std::size_t candidate_row,
                                      const std::vector<std::string>& feature_names) {
    if (candidate_row >= standardized.rows) {
        throw ValidationError("explain: candidate row out of range");
    }
    struct Item {
        std::size_t original_col;
        double z;
    };
    std::vector<Item> items;
    items.reserve(params.kept_features.size());
    for (std::size_t c = 0; c < params.kept_features.size(); ++c) {
        items.push_back({params.kept_features[c], standardized.at(candidate_row, c)});
    }
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        if (std::abs(a.z) != std::abs(b.z)) return std::abs(a.z) > std::abs(b.z);
        return a.original_col < b.original_col;
    });
    std::vector<ExplanationEntry> out;
    out.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        out.push_back({feature_names.at(items[i].original_col), items[i].z, int(i + 1)});
    }
    return out;
}

namespace {

/// Score strictly above which a detector votes anomaly: the empirical
/// (1 - contamination) quantile by the nearest-rank-from-above rule.
double contamination_threshold(std::vector<double> scores, double contamination) {
    std::sort(scores.begin(), scores.end());
    double q = 1.0 - contamination;
    std::size_t rank = std::size_t(std::ceil(q * double(scores.size())));
    rank = std::min(std::max<std::size_t>(rank, 1), scores.size());
    return scores[rank - 1];
}

bool all_zero(const ReleaseRecord& rec) {
    return std::all_of(rec.p.begin(), rec.p.end(), [](double v) { return v == 0.0; });
}

} // namespace

GateDecision gate_check(const ReleaseDataset& history, const ReleaseRecord& candidate,
                        const GateConfig& config) {
    config.validate();
    history.validate();
    candidate.validate();
    if (!history.empty() && candidate.id <= history.records.back().id) {
        throw ValidationError("gate_check: candidate id must exceed all history ids");
    }

    GateDecision decision;
    decision.candidate_id = candidate.id;
    decision.history_size = history.size();
    decision.flagged_candidate = candidate;

    if (history.size() < config.warmup_releases) {
        decision.verdict = Verdict::insufficient_history;
        decision.flagged_candidate.flag = Flag::unset;
        return decision;
    }

    auto finish = [&](Verdict v) {
        decision.verdict = v;
        switch (v) {
        case Verdict::pass: decision.flagged_candidate.flag = Flag::ok; break;
        case Verdict::review: decision.flagged_candidate.flag = Flag::review; break;
        case Verdict::anomaly: decision.flagged_candidate.flag = Flag::anomaly; break;
        case Verdict::insufficient_history: decision.flagged_candidate.flag = Flag::unset;
        }
        return decision;
    };

    if (all_zero(candidate)) {
        decision.reason = "no activity";
        return finish(Verdict::review);
    }

    std::vector<ReleaseRecord> rows = history.records;
    rows.push_back(candidate);
    FeatureMatrix raw = to_feature_matrix(rows);

    auto [screened, kept_cols] = screen_features(raw, config.detector.min_distinct);
    std::vector<std::string> names;
    names.reserve(kept_cols.size());
    for (std::size_t c : kept_cols) names.emplace_back(kFeatureNames[c]);

    FeatureMatrix z;
    StandardizationParams params;
    try {
        if (screened.cols == 0) throw NoVarianceError("every feature is near-constant");
        std::tie(z, params) = standardize(screened);
    } catch (const NoVarianceError&) {
        decision.reason = "degenerate history";
        return finish(Verdict::review);
    }

    const std::size_t n = z.rows;
    const std::size_t cand = n - 1;
    const std::size_t k = std::min(config.detector.k_neighbors, n - 1);

    ScoreVector lof = lof_scores(z, k);
    ScoreVector knn = knn_outlier_scores(z, k);
    ScoreVector maha = mahalanobis_scores(z, config.detector.covariance_ridge);
    ScoreVector iso = isolation_forest_scores(z, config.detector.tree_count,
                                              config.detector.subsample_size,
                                              config.detector.rng_seed);

    decision.per_detector_scores = {
        {"lof", lof.scores[cand]},
        {"knn", knn.scores[cand]},
        {"mahalanobis", maha.scores[cand]},
        {"iforest", iso.scores[cand]},
    };
    decision.lof_score = lof.scores[cand];
    decision.explanation = explain(z, params, cand, names);

    Severity lof_severity = classify(lof.scores[cand], config.detector);

    Verdict verdict;
    if (config.ensemble_mode == EnsembleMode::lof_only) {
        switch (lof_severity) {
        case Severity::anomaly: verdict = Verdict::anomaly; break;
        case Severity::review: verdict = Verdict::review; break;
        default: verdict = Verdict::pass;
        }
    } else {
        std::size_t votes = lof_severity == Severity::anomaly ? 1 : 0;
        for (const ScoreVector* sv : {&knn, &maha, &iso}) {
            double threshold = contamination_threshold(sv->scores, config.contamination);
            if (sv->scores[cand] > threshold) ++votes;
        }
        if (votes >= config.ensemble_quorum) {
            verdict = Verdict::anomaly;
        } else if (lof_severity != Severity::ok) {
            // An anomaly-level LOF signal that misses quorum still warrants
            // human review rather than a silent pass.
            verdict = Verdict::review;
        } else {
            verdict = Verdict::pass;
        }
    }
    return finish(verdict);
}

} // namespace relgate
