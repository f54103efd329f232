#pragma once

#include "relgate/config.hpp"

#include <iosfwd>
#include <string>

namespace relgate {

/// CI-facing exit codes shared by every subcommand.
enum ExitCode : int {
    kExitPass = 0,    // pass or insufficient_history: release proceeds
    kExitAnomaly = 1, // release suspended
    kExitReview = 2,  // human attention requested
    kExitError = 3,   // operational failure
};

struct ReportOptions {
    std::string mode;       // "scores" or "boundaries"
    std::size_t feature_x = 1; // 1-based P-number
    std::size_t feature_y = 4;
    std::size_t resolution = 100;
    std::string out_dir = ".";
};

/// Collects the window since the last release (or project start), normalizes,
/// and stages the candidate in `<dataset_path>.candidate.json`.
int cmd_collect(const ToolConfig& config, const Date& release_date, std::ostream& out,
                std::ostream& err);

/// Runs the gate on the staged candidate, prints the decision as JSON,
/// rewrites the staged candidate with its FLAG, and notifies the webhook on
/// review/anomaly. Never writes the dataset file.
int cmd_check(const ToolConfig& config, std::ostream& out, std::ostream& err);

/// Appends the staged (checked) candidate to the dataset and removes the
/// staging file.
int cmd_append(const ToolConfig& config, std::ostream& out, std::ostream& err);

/// Writes scores.csv or per-detector boundary_<name>.csv files under
/// options.out_dir.
int cmd_report(const ToolConfig& config, const ReportOptions& options, std::ostream& out,
               std::ostream& err);

/// Staged-candidate serialization, shared with the tests.
std::string candidate_to_json(const ReleaseRecord& record);
ReleaseRecord candidate_from_json(const std::string& json_text);
void write_candidate_file(const ReleaseRecord& record, const std::string& path);
ReleaseRecord read_candidate_file(const std::string& path);

/// Decision rendering used by cmd_check (exposed for tests).
std::string decision_to_json(const GateDecision& decision, const std::string& notification);

} // namespace relgate
