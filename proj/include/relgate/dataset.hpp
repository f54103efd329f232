#pragma once

#include "relgate/dates.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace relgate {

/// Anomaly flag persisted with each release. `review` is our extension of the
/// plain present/absent marker.
enum class Flag { unset, ok, review, anomaly };

std::string flag_to_csv(Flag f);       // "" / "0" / "2" / "1"
Flag flag_from_csv(const std::string&);
std::string flag_name(Flag f);
Flag flag_from_name(const std::string&);

/// Raw event counts gathered from the toolchain for one release window,
/// before working-day normalization.
struct RawActivityCounts {
    long lines_changed = 0; // LoC added + modified + deleted
    long commits = 0;
    long failed_builds = 0;
    long failed_tests = 0;
    long failed_deliveries = 0;
    long quality_issues = 0;
    long repo_issues = 0;
    Date window_start; // exclusive
    Date window_end;   // inclusive

    /// Throws ValidationError on negative counts or start > end.
    void validate() const;
};

constexpr std::size_t kFeatureCount = 6;
extern const std::array<const char*, kFeatureCount> kFeatureNames; // "P1".."P6"

/// One release: the six normalized metrics plus identity and flag.
/// p[0]..p[5] are P1..P6; all per working day, P1 additionally per commit.
struct ReleaseRecord {
    int id = 0;
    Date date;
    std::array<double, kFeatureCount> p{};
    Flag flag = Flag::unset;

    /// Throws ValidationError on id < 1 or non-finite/negative metrics.
    void validate() const;
};

/// Ordered release history. Ids strictly increase, dates never decrease.
struct ReleaseDataset {
    std::vector<ReleaseRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }

    /// Throws ValidationError if any sequence invariant is broken.
    void validate() const;

    /// In-memory append with ordering checks; file persistence is
    /// append_release() below.
    void push(const ReleaseRecord& record);
};

/// Normalizes raw counts into a ReleaseRecord dated `release_date`.
/// W = max(working_days(prev_release_date, release_date), 1); each count is
/// divided by W, and P1 is lines-per-commit per working day (0 when the
/// window has no commits).
ReleaseRecord normalize(const RawActivityCounts& raw, const Date& prev_release_date,
                        const Date& release_date, int id);

/// Reads a dataset CSV. Header must be P1..P6,ID,DATE with optional FLAG;
/// dates may be ISO 8601 or M/D/YYYY. Throws ParseError naming the offending
/// row on malformed input or invariant violations.
ReleaseDataset load_dataset(const std::string& path);

/// Writes the full dataset: 9-column header, ISO dates, metrics at up to two
/// decimals with trailing zeros trimmed. Atomic (temp file + rename).
void save_dataset(const ReleaseDataset& dataset, const std::string& path);

/// Appends in memory and persists atomically. On ordering violations the
/// exception leaves both the dataset and the file untouched.
void append_release(ReleaseDataset& dataset, const ReleaseRecord& record,
                    const std::string& path);

/// CSV metric formatting, exposed for the report writers: up to 2 decimal
/// places, trailing zeros (and a bare dot) trimmed.
std::string format_metric(double value);

} // namespace relgate
