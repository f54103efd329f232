#include "relgate/collectors.hpp"

#include "relgate/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <thread>

namespace relgate {

using nlohmann::json;

std::string source_kind_name(SourceKind kind) {
    switch (kind) {
    case SourceKind::vcs: return "vcs";
    case SourceKind::ci: return "ci";
    case SourceKind::quality: return "quality";
    }
    return "?";
}

SourceKind source_kind_from_name(const std::string& name) {
    if (name == "vcs") return SourceKind::vcs;
    if (name == "ci") return SourceKind::ci;
    if (name == "quality") return SourceKind::quality;
    throw ConfigError("unknown source kind '" + name + "'");
}

void SourceConfig::validate() const {
    if (base_url.empty()) throw ConfigError("source base_url must not be empty");
    if (timeout.count() <= 0) throw ConfigError("source timeout must be positive");
    if (retries < 0) throw ConfigError("source retries must be nonnegative");
}

void MetricsWindow::validate() const {
    if (!(start < end)) {
        throw ValidationError("metrics window start " + to_iso_string(start) +
                              " must precede end " + to_iso_string(end));
    }
}

namespace {

std::string source_label(const SourceConfig& cfg) {
    std::string label = source_kind_name(cfg.kind);
    if (!cfg.repo_or_job.empty()) label += "(" + cfg.repo_or_job + ")";
    return label;
}

bool is_file_source(const SourceConfig& cfg) {
    return cfg.base_url.rfind("file://", 0) == 0;
}

json load_fixture(const SourceConfig& cfg, const std::string& filename) {
    std::string dir = cfg.base_url.substr(7);
    std::string path = dir + "/" + filename;
    std::ifstream in(path);
    if (!in) {
        throw SourceError(source_label(cfg), "cannot open fixture '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(source_label(cfg) + ": malformed JSON in '" + path + "': " +
                         e.what());
    }
}

struct SplitUrl {
    std::string host_port; // scheme://host[:port]
    std::string path;      // possibly empty prefix
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("base_url '" + url + "' must carry a scheme");
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    return {url.substr(0, path_start), url.substr(path_start)};
}

/// GET with bearer auth, retrying on 5xx and transport errors with
/// exponential backoff. 4xx fails immediately.
json http_get_json(const SourceConfig& cfg, const std::string& path_and_query) {
    SplitUrl url = split_url(cfg.base_url);
    httplib::Client client(url.host_port);
    client.set_connection_timeout(cfg.timeout);
    client.set_read_timeout(cfg.timeout);
    httplib::Headers headers;
    if (cfg.auth_token && !cfg.auth_token->empty()) {
        headers.emplace("Authorization", "Bearer " + *cfg.auth_token);
    }

    const std::string full_path = url.path + path_and_query;
    std::string last_error;
    for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(cfg.backoff_base * (1 << (attempt - 1)));
        }
        auto res = client.Get(full_path, headers);
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue; // retryable
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue; // retryable
        }
        if (res->status >= 400) {
            throw SourceError(source_label(cfg),
                              "HTTP " + std::to_string(res->status) + " for " + full_path);
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw ParseError(source_label(cfg) + ": malformed JSON from " + full_path +
                             ": " + e.what());
        }
    }
    throw SourceError(source_label(cfg),
                      last_error + " after " + std::to_string(cfg.retries + 1) +
                          " attempts for " + full_path);
}

std::string window_query(const MetricsWindow& w) {
    return "since=" + to_iso_string(w.start) + "&until=" + to_iso_string(w.end);
}

/// Fetches a paginated JSON array endpoint (page=1,2,... until an empty
/// array). File sources hold the whole collection in one fixture.
std::vector<json> fetch_events(const SourceConfig& cfg, const std::string& endpoint,
                               const std::string& fixture, const MetricsWindow& window,
                               bool paginated) {
    std::vector<json> events;
    auto take = [&](const json& arr) {
        if (!arr.is_array()) {
            throw ParseError(source_label(cfg) + ": expected a JSON array from " +
                             endpoint);
        }
        for (const auto& e : arr) events.push_back(e);
        return arr.size();
    };

    if (is_file_source(cfg)) {
        take(load_fixture(cfg, fixture));
        return events;
    }
    if (!paginated) {
        take(http_get_json(cfg, "/" + endpoint + "?" + window_query(window)));
        return events;
    }
    constexpr int kMaxPages = 10'000; // runaway-pagination guard
    for (int page = 1;; ++page) {
        if (page > kMaxPages) {
            throw SourceError(source_label(cfg),
                              endpoint + " pagination did not terminate within " +
                                  std::to_string(kMaxPages) + " pages");
        }
        auto got = take(http_get_json(cfg, "/" + endpoint + "?" + window_query(window) +
                                               "&page=" + std::to_string(page)));
        if (got == 0) break;
    }
    return events;
}

Date event_date(const SourceConfig& cfg, const json& event, const char* field) {
    if (!event.contains(field) || !event[field].is_string()) {
        throw ParseError(source_label(cfg) + ": event missing '" + field + "'");
    }
    try {
        return parse_date(event[field].get<std::string>());
    } catch (const Error& e) {
        throw ParseError(source_label(cfg) + ": " + e.what());
    }
}

long event_count(const SourceConfig& cfg, const json& event, const char* field) {
    if (!event.contains(field) || !event[field].is_number()) {
        throw ParseError(source_label(cfg) + ": event missing numeric '" + field + "'");
    }
    long v = event[field].get<long>();
    if (v < 0) throw ParseError(source_label(cfg) + ": negative '" + field + "'");
    return v;
}

} // namespace

VcsCounts collect_vcs(const SourceConfig& config, const MetricsWindow& window) {
    config.validate();
    window.validate();
    if (config.kind != SourceKind::vcs) throw ConfigError("collect_vcs needs a vcs source");

    VcsCounts counts;
    for (const auto& commit :
         fetch_events(config, "commits", "commits.json", window, true)) {
        if (!window.contains(event_date(config, commit, "date"))) continue;
        counts.commits += 1;
        counts.lines_changed += event_count(config, commit, "additions") +
                                event_count(config, commit, "deletions");
    }
    for (const auto& issue : fetch_events(config, "issues", "issues.json", window, false)) {
        if (window.contains(event_date(config, issue, "opened_date"))) {
            counts.repo_issues += 1;
        }
    }
    return counts;
}

CiCounts collect_ci(const SourceConfig& config, const MetricsWindow& window) {
    config.validate();
    window.validate();
    if (config.kind != SourceKind::ci) throw ConfigError("collect_ci needs a ci source");

    CiCounts counts;
    for (const auto& run : fetch_events(config, "runs", "runs.json", window, true)) {
        if (!window.contains(event_date(config, run, "date"))) continue;
        std::string status = run.value("status", "");
        if (status != "failed") continue;
        std::string stage =
            run.contains("failed_stage") && run["failed_stage"].is_string()
                ? run["failed_stage"].get<std::string>()
                : "";
        if (stage == "build") {
            counts.failed_builds += 1;
        } else if (stage == "test") {
            counts.failed_tests += 1;
        } else if (stage == "delivery") {
            counts.failed_deliveries += 1;
        } else {
            throw ParseError(source_label(config) +
                             ": failed run without a known failed_stage");
        }
    }
    return counts;
}

long collect_quality(const SourceConfig& config, const MetricsWindow& window) {
    config.validate();
    window.validate();
    if (config.kind != SourceKind::quality) {
        throw ConfigError("collect_quality needs a quality source");
    }
    long issues = 0;
    for (const auto& issue : fetch_events(config, "issues", "issues.json", window, false)) {
        if (window.contains(event_date(config, issue, "reported_date"))) issues += 1;
    }
    return issues;
}

RawActivityCounts collect_all(const std::vector<SourceConfig>& configs,
                              const MetricsWindow& window) {
    window.validate();
    const SourceConfig* by_kind[3] = {nullptr, nullptr, nullptr};
    for (const auto& cfg : configs) {
        auto idx = std::size_t(cfg.kind);
        if (by_kind[idx]) {
            throw ConfigError("duplicate source of kind " + source_kind_name(cfg.kind));
        }
        by_kind[idx] = &cfg;
    }
    for (std::size_t i = 0; i < 3; ++i) {
        if (!by_kind[i]) {
            throw ConfigError("missing source of kind " +
                              source_kind_name(SourceKind(i)));
        }
    }

    VcsCounts vcs = collect_vcs(*by_kind[std::size_t(SourceKind::vcs)], window);
    CiCounts ci = collect_ci(*by_kind[std::size_t(SourceKind::ci)], window);
    long quality = collect_quality(*by_kind[std::size_t(SourceKind::quality)], window);

    RawActivityCounts raw;
    raw.lines_changed = vcs.lines_changed;
    raw.commits = vcs.commits;
    raw.repo_issues = vcs.repo_issues;
    raw.failed_builds = ci.failed_builds;
    raw.failed_tests = ci.failed_tests;
    raw.failed_deliveries = ci.failed_deliveries;
    raw.quality_issues = quality;
    raw.window_start = window.start;
    raw.window_end = window.end;
    raw.validate();
    return raw;
}

} // namespace relgate
