#include "relgate/dataset.hpp"

#include "relgate/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

namespace relgate {

const std::array<const char*, kFeatureCount> kFeatureNames = {"P1", "P2", "P3",
                                                              "P4", "P5", "P6"};

std::string flag_to_csv(Flag f) {
    switch (f) {
    case Flag::unset: return "";
    case Flag::ok: return "0";
    case Flag::anomaly: return "1";
    case Flag::review: return "2";
    }
    return "";
}

Flag flag_from_csv(const std::string& s) {
    if (s.empty()) return Flag::unset;
    if (s == "0") return Flag::ok;
    if (s == "1") return Flag::anomaly;
    if (s == "2") return Flag::review;
    throw ParseError("unknown FLAG value '" + s + "'");
}

std::string flag_name(Flag f) {
    switch (f) {
    case Flag::unset: return "unset";
    case Flag::ok: return "ok";
    case Flag::review: return "review";
    case Flag::anomaly: return "anomaly";
    }
    return "unset";
}

Flag flag_from_name(const std::string& s) {
    if (s == "unset") return Flag::unset;
    if (s == "ok") return Flag::ok;
    if (s == "review") return Flag::review;
    if (s == "anomaly") return Flag::anomaly;
    throw ParseError("unknown flag name '" + s + "'");
}

void RawActivityCounts::validate() const {
    const long counts[] = {lines_changed, commits,        failed_builds, failed_tests,
                           failed_deliveries, quality_issues, repo_issues};
    for (long c : counts) {
        if (c < 0) throw ValidationError("raw activity counts must be nonnegative");
    }
    if (window_start > window_end) {
        throw ValidationError("activity window start " + to_iso_string(window_start) +
                              " is after end " + to_iso_string(window_end));
    }
}

void ReleaseRecord::validate() const {
    if (id < 1) throw ValidationError("release id must be >= 1, got " + std::to_string(id));
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (!std::isfinite(p[i]) || p[i] < 0.0) {
            throw ValidationError(std::string("metric ") + kFeatureNames[i] +
                                  " of release " + std::to_string(id) +
                                  " must be finite and nonnegative");
        }
    }
}

void ReleaseDataset::validate() const {
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].validate();
        if (i == 0) continue;
        if (records[i].id <= records[i - 1].id) {
            throw ValidationError("release ids must strictly increase: id " +
                                  std::to_string(records[i].id) + " follows " +
                                  std::to_string(records[i - 1].id));
        }
        if (records[i].date < records[i - 1].date) {
            throw ValidationError("release dates must not decrease: " +
                                  to_iso_string(records[i].date) + " follows " +
                                  to_iso_string(records[i - 1].date));
        }
    }
}

void ReleaseDataset::push(const ReleaseRecord& record) {
    record.validate();
    if (!records.empty()) {
        if (record.id <= records.back().id) {
            throw ValidationError("append: id " + std::to_string(record.id) +
                                  " not greater than last id " +
                                  std::to_string(records.back().id));
        }
        if (record.date < records.back().date) {
            throw ValidationError("append: date " + to_iso_string(record.date) +
                                  " precedes last release date " +
                                  to_iso_string(records.back().date));
        }
    }
    records.push_back(record);
}

ReleaseRecord normalize(const RawActivityCounts& raw, const Date& prev_release_date,
                        const Date& release_date, int id) {
    raw.validate();
    if (prev_release_date >= release_date) {
        throw ValidationError("normalize: previous release date must precede release date");
    }
    double w = std::max(working_days(prev_release_date, release_date), 1);
    ReleaseRecord rec;
    rec.id = id;
    rec.date = release_date;
    rec.p[0] = raw.commits > 0
                   ? (double(raw.lines_changed) / double(raw.commits)) / w
                   : 0.0;
    rec.p[1] = double(raw.failed_builds) / w;
    rec.p[2] = double(raw.failed_tests) / w;
    rec.p[3] = double(raw.failed_deliveries) / w;
    rec.p[4] = double(raw.quality_issues) / w;
    rec.p[5] = double(raw.repo_issues) / w;
    rec.flag = Flag::unset;
    rec.validate();
    return rec;
}

std::string format_metric(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    std::string s = buf;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

double parse_metric(const std::string& text, std::size_t row, const char* name) {
    const std::string t = trim(text);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw ParseError("row " + std::to_string(row) + ": bad numeric value '" + text +
                         "' for " + name);
    }
    if (v < 0.0) {
        throw ParseError("row " + std::to_string(row) + ": negative value for " +
                         std::string(name));
    }
    return v;
}

} // namespace

ReleaseDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("dataset file '" + path + "' is empty");
    auto header = split_csv_line(trim(line));
    const std::vector<std::string> want = {"P1", "P2", "P3", "P4", "P5", "P6", "ID", "DATE"};
    bool has_flag = header.size() == 9 && trim(header[8]) == "FLAG";
    if (header.size() != 8 && !has_flag) {
        throw ParseError("dataset header must be P1..P6,ID,DATE[,FLAG]");
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
        if (trim(header[i]) != want[i]) {
            throw ParseError("dataset header column " + std::to_string(i + 1) +
                             " must be " + want[i]);
        }
    }

    ReleaseDataset ds;
    std::size_t row = 1; // header is row 1
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(trim(line));
        if (fields.size() != header.size()) {
            throw ParseError("row " + std::to_string(row) + ": expected " +
                             std::to_string(header.size()) + " columns, got " +
                             std::to_string(fields.size()));
        }
        ReleaseRecord rec;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            rec.p[i] = parse_metric(fields[i], row, kFeatureNames[i]);
        }
        const std::string id_text = trim(fields[6]);
        auto [id_end, id_ec] =
            std::from_chars(id_text.data(), id_text.data() + id_text.size(), rec.id);
        if (id_ec != std::errc{} || id_end != id_text.data() + id_text.size()) {
            throw ParseError("row " + std::to_string(row) + ": bad ID value '" + fields[6] +
                             "'");
        }
        try {
            rec.date = parse_date(trim(fields[7]));
            rec.flag = has_flag ? flag_from_csv(trim(fields[8])) : Flag::unset;
            ds.push(rec);
        } catch (const Error& e) {
            throw ParseError("row " + std::to_string(row) + ": " + e.what());
        }
    }
    return ds;
}

void save_dataset(const ReleaseDataset& dataset, const std::string& path) {
    dataset.validate();
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error("cannot write dataset file '" + tmp.string() + "'");
        out << "P1,P2,P3,P4,P5,P6,ID,DATE,FLAG\n";
        for (const auto& rec : dataset.records) {
            for (std::size_t i = 0; i < kFeatureCount; ++i) {
                out << format_metric(rec.p[i]) << ',';
            }
            out << rec.id << ',' << to_iso_string(rec.date) << ',' << flag_to_csv(rec.flag)
                << '\n';
        }
        out.flush();
        if (!out) throw Error("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot replace dataset file '" + path + "': " + ec.message());
    }
}

void append_release(ReleaseDataset& dataset, const ReleaseRecord& record,
                    const std::string& path) {
    ReleaseDataset updated = dataset;
    updated.push(record); // throws before any file touch on ordering violations
    save_dataset(updated, path);
    dataset = std::move(updated);
}

} // namespace relgate
