#include "relgate/commands.hpp"

#include "relgate/errors.hpp"
#include "relgate/notify.hpp"

#include <nlohmann/json.hpp>

#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace relgate {

using nlohmann::json;

namespace {

/// Advisory lock on `<path>.lock`, held for the duration of an append so
/// overlapping CI runs serialize.
class FileLock {
public:
    explicit FileLock(const std::string& path) : lock_path_(path + ".lock") {
        fd_ = ::open(lock_path_.c_str(), O_CREAT | O_RDWR, 0644);
        if (fd_ < 0) {
            throw Error("cannot open lock file '" + lock_path_ + "': " +
                        std::strerror(errno));
        }
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw Error("cannot lock '" + lock_path_ + "': " + std::strerror(errno));
        }
    }
    ~FileLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    std::string lock_path_;
    int fd_ = -1;
};

ReleaseDataset load_or_empty(const std::string& path) {
    if (!std::filesystem::exists(path)) return {};
    return load_dataset(path);
}

std::string metric_csv(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

int verdict_exit_code(Verdict v) {
    switch (v) {
    case Verdict::pass:
    case Verdict::insufficient_history: return kExitPass;
    case Verdict::anomaly: return kExitAnomaly;
    case Verdict::review: return kExitReview;
    }
    return kExitError;
}

} // namespace

std::string candidate_to_json(const ReleaseRecord& record) {
    json j;
    j["id"] = record.id;
    j["date"] = to_iso_string(record.date);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        std::string key = kFeatureNames[i];
        for (auto& ch : key) ch = char(std::tolower(ch));
        j[key] = record.p[i];
    }
    j["flag"] = flag_name(record.flag);
    return j.dump(2) + "\n";
}

ReleaseRecord candidate_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("candidate file is not valid JSON: ") + e.what());
    }
    ReleaseRecord rec;
    try {
        rec.id = j.at("id").get<int>();
        rec.date = parse_date(j.at("date").get<std::string>());
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            std::string key = kFeatureNames[i];
            for (auto& ch : key) ch = char(std::tolower(ch));
            rec.p[i] = j.at(key).get<double>();
        }
        rec.flag = flag_from_name(j.value("flag", "unset"));
    } catch (const json::exception& e) {
        throw ParseError(std::string("candidate file is missing fields: ") + e.what());
    }
    rec.validate();
    return rec;
}

void write_candidate_file(const ReleaseRecord& record, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write candidate file '" + path + "'");
    out << candidate_to_json(record);
    out.flush();
    if (!out) throw Error("write failed for candidate file '" + path + "'");
}

ReleaseRecord read_candidate_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("no staged candidate at '" + path + "' (run collect first)");
    std::ostringstream ss;
    ss << in.rdbuf();
    return candidate_from_json(ss.str());
}

std::string decision_to_json(const GateDecision& decision,
                             const std::string& notification) {
    json j;
    j["verdict"] = verdict_name(decision.verdict);
    j["candidate_id"] = decision.candidate_id;
    j["history_size"] = decision.history_size;
    if (decision.lof_score) {
        j["lof_score"] = *decision.lof_score;
    } else {
        j["lof_score"] = nullptr;
    }
    j["scores"] = decision.per_detector_scores;
    json expl = json::array();
    for (const auto& e : decision.explanation) {
        expl.push_back({{"feature", e.feature}, {"z", e.z}, {"rank", e.rank}});
    }
    j["explanation"] = expl;
    if (!decision.reason.empty()) j["reason"] = decision.reason;
    if (!notification.empty()) j["notification"] = notification;
    return j.dump(2) + "\n";
}

int cmd_collect(const ToolConfig& config, const Date& release_date, std::ostream& out,
                std::ostream& err) {
    try {
        config.validate();
        ReleaseDataset ds = load_or_empty(config.dataset_path);

        Date window_start =
            ds.empty() ? config.project_start_date : ds.records.back().date;
        if (!(window_start < release_date)) {
            err << "release date " << to_iso_string(release_date)
                << " must be after " << (ds.empty() ? "project start " : "last release ")
                << to_iso_string(window_start) << "\n";
            return kExitError;
        }
        int id = ds.empty() ? 1 : ds.records.back().id + 1;

        MetricsWindow window{window_start, release_date};
        RawActivityCounts raw = collect_all(config.sources, window);
        ReleaseRecord candidate = normalize(raw, window_start, release_date, id);
        write_candidate_file(candidate, config.candidate_path());
        out << candidate_to_json(candidate);
        return kExitPass;
    } catch (const std::exception& e) {
        err << "collect failed: " << e.what() << "\n";
        return kExitError;
    }
}

int cmd_check(const ToolConfig& config, std::ostream& out, std::ostream& err) {
    try {
        config.validate();
        ReleaseRecord candidate = read_candidate_file(config.candidate_path());
        ReleaseDataset ds = load_or_empty(config.dataset_path);

        GateDecision decision = gate_check(ds, candidate, config.gate);

        std::string notification;
        if ((decision.verdict == Verdict::anomaly || decision.verdict == Verdict::review) &&
            config.webhook_url && !config.webhook_url->empty()) {
            DeliveryResult delivery =
                notify(*config.webhook_url, make_notification(decision));
            notification = delivery.detail;
            if (!delivery.delivered) {
                err << "notification failed (release decision unaffected): "
                    << delivery.detail << "\n";
            }
        }

        write_candidate_file(decision.flagged_candidate, config.candidate_path());
        out << decision_to_json(decision, notification);
        return verdict_exit_code(decision.verdict);
    } catch (const std::exception& e) {
        err << "check failed: " << e.what() << "\n";
        return kExitError;
    }
}

int cmd_append(const ToolConfig& config, std::ostream& out, std::ostream& err) {
    try {
        config.validate();
        ReleaseRecord candidate = read_candidate_file(config.candidate_path());
        FileLock lock(config.dataset_path);
        ReleaseDataset ds = load_or_empty(config.dataset_path);

        if (candidate.flag == Flag::unset && ds.size() >= config.gate.warmup_releases) {
            err << "candidate has no FLAG; run check before append\n";
            return kExitError;
        }

        append_release(ds, candidate, config.dataset_path);
        std::filesystem::remove(config.candidate_path());
        out << "appended release " << candidate.id << " (" << ds.size() << " records)\n";
        return kExitPass;
    } catch (const std::exception& e) {
        err << "append failed: " << e.what() << "\n";
        return kExitError;
    }
}

namespace {

void write_scores_report(const ToolConfig& config, const ReleaseDataset& ds,
                         const std::filesystem::path& out_path) {
    FeatureMatrix raw = to_feature_matrix(ds.records);
    auto [screened, kept] = screen_features(raw, config.gate.detector.min_distinct);
    if (screened.cols == 0) throw NoVarianceError("every feature is near-constant");
    auto [z, params] = standardize(screened);

    std::size_t k = std::min(config.gate.detector.k_neighbors, z.rows - 1);
    ScoreVector lof = lof_scores(z, k);
    ScoreVector knn = knn_outlier_scores(z, k);
    ScoreVector maha = mahalanobis_scores(z, config.gate.detector.covariance_ridge);
    ScoreVector iso = isolation_forest_scores(z, config.gate.detector.tree_count,
                                              config.gate.detector.subsample_size,
                                              config.gate.detector.rng_seed);

    std::ofstream csv(out_path, std::ios::trunc);
    if (!csv) throw Error("cannot write '" + out_path.string() + "'");
    csv << "ID,lof,knn,mahalanobis,iforest\n";
    for (std::size_t r = 0; r < z.rows; ++r) {
        csv << z.row_ids[r] << ',' << metric_csv(lof.scores[r]) << ','
            << metric_csv(knn.scores[r]) << ',' << metric_csv(maha.scores[r]) << ','
            << metric_csv(iso.scores[r]) << '\n';
    }
}

void write_boundary_reports(const ToolConfig& config, const ReleaseDataset& ds,
                            const ReportOptions& options,
                            const std::filesystem::path& out_dir) {
    if (options.feature_x == options.feature_y) {
        throw ConfigError("--fx and --fy must name different features");
    }
    if (options.feature_x < 1 || options.feature_x > kFeatureCount ||
        options.feature_y < 1 || options.feature_y > kFeatureCount) {
        throw ConfigError("feature numbers must be between 1 and 6");
    }

    FeatureMatrix raw = to_feature_matrix(ds.records);
    auto screened_pair = screen_features(raw, config.gate.detector.min_distinct);
    const FeatureMatrix& screened = screened_pair.first;
    const std::vector<std::size_t>& kept = screened_pair.second;
    if (screened.cols == 0) throw NoVarianceError("every feature is near-constant");
    auto z_pair = standardize(screened);
    const FeatureMatrix& z = z_pair.first;
    const StandardizationParams& params = z_pair.second;

    // Map the requested P-numbers through screening + standardization drops.
    auto col_of = [&](std::size_t p_number) -> std::size_t {
        std::size_t original = p_number - 1;
        for (std::size_t c = 0; c < params.kept_features.size(); ++c) {
            if (kept[params.kept_features[c]] == original) return c;
        }
        throw ConfigError(std::string("feature ") + kFeatureNames[original] +
                          " was screened out of the detector pipeline");
    };
    std::size_t cx = col_of(options.feature_x);
    std::size_t cy = col_of(options.feature_y);

    // Raw-unit coordinates in the output files.
    auto unscale = [&](std::size_t z_col, double v) {
        std::size_t sc = params.kept_features[z_col];
        return v * params.stds[sc] + params.means[sc];
    };

    for (DetectorKind kind : {DetectorKind::lof, DetectorKind::knn,
                              DetectorKind::mahalanobis, DetectorKind::iforest}) {
        BoundaryGrid grid = decision_boundary_grid(kind, z, cx, cy, options.resolution,
                                                   config.gate.detector);
        std::filesystem::path path =
            out_dir / (std::string("boundary_") + detector_name(kind) + ".csv");
        std::ofstream csv(path, std::ios::trunc);
        if (!csv) throw Error("cannot write '" + path.string() + "'");
        csv << kFeatureNames[options.feature_x - 1] << ','
            << kFeatureNames[options.feature_y - 1] << ",score\n";
        for (std::size_t iy = 0; iy < grid.resolution; ++iy) {
            for (std::size_t ix = 0; ix < grid.resolution; ++ix) {
                csv << metric_csv(unscale(cx, grid.xs[ix])) << ','
                    << metric_csv(unscale(cy, grid.ys[iy])) << ','
                    << metric_csv(grid.score_at(ix, iy)) << '\n';
            }
        }
    }
}

} // namespace

int cmd_report(const ToolConfig& config, const ReportOptions& options, std::ostream& out,
               std::ostream& err) {
    try {
        config.validate();
        ReleaseDataset ds = load_dataset(config.dataset_path);
        if (ds.size() < config.gate.warmup_releases) {
            err << "report needs at least " << config.gate.warmup_releases
                << " releases, dataset has " << ds.size() << "\n";
            return kExitError;
        }
        std::filesystem::path out_dir(options.out_dir);
        std::filesystem::create_directories(out_dir);

        if (options.mode == "scores") {
            auto path = out_dir / "scores.csv";
            write_scores_report(config, ds, path);
            out << "wrote " << path.string() << "\n";
        } else if (options.mode == "boundaries") {
            write_boundary_reports(config, ds, options, out_dir);
            out << "wrote boundary_{lof,knn,mahalanobis,iforest}.csv under "
                << out_dir.string() << "\n";
        } else {
            err << "unknown report mode '" << options.mode << "'\n";
            return kExitError;
        }
        return kExitPass;
    } catch (const std::exception& e) {
        err << "report failed: " << e.what() << "\n";
        return kExitError;
    }
}

} // namespace relgate
