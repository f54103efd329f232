#pragma once

#include "relgate/dataset.hpp"
#include "relgate/dates.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace relgate {

enum class SourceKind { vcs, ci, quality };

std::string source_kind_name(SourceKind kind);
SourceKind source_kind_from_name(const std::string& name);

/// One toolchain endpoint. base_url is either an http(s) URL or a
/// `file://<dir>` prefix pointing at JSON fixtures.
struct SourceConfig {
    SourceKind kind = SourceKind::vcs;
    std::string base_url;
    std::optional<std::string> auth_token;
    std::string repo_or_job; // label used in error reporting
    std::chrono::milliseconds timeout{30'000};
    int retries = 2; // additional attempts on 5xx/timeout
    std::chrono::milliseconds backoff_base{1'000};

    void validate() const;
};

/// Release window: (start, end], matching the metric reset semantics.
struct MetricsWindow {
    Date start; // exclusive
    Date end;   // inclusive

    void validate() const;
    bool contains(const Date& d) const { return start < d && d <= end; }
};

struct VcsCounts {
    long lines_changed = 0;
    long commits = 0;
    long repo_issues = 0;
};

struct CiCounts {
    long failed_builds = 0;
    long failed_tests = 0;
    long failed_deliveries = 0;
};

/// Sums commit additions+deletions and counts commits and opened issues dated
/// inside the window. Follows pagination to exhaustion.
VcsCounts collect_vcs(const SourceConfig& config, const MetricsWindow& window);

/// Counts failed runs inside the window, partitioned by the first failing
/// stage (build / test / delivery).
CiCounts collect_ci(const SourceConfig& config, const MetricsWindow& window);

/// Counts quality issues reported inside the window.
long collect_quality(const SourceConfig& config, const MetricsWindow& window);

/// Runs all three collectors (exactly one config per kind required) and
/// merges the counts. Any failure aborts the whole collection.
RawActivityCounts collect_all(const std::vector<SourceConfig>& configs,
                              const MetricsWindow& window);

} // namespace relgate
