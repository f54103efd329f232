#include "relgate/config.hpp"

#include "relgate/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace relgate {

using nlohmann::json;

void ToolConfig::validate() const {
    if (dataset_path.empty()) throw ConfigError("dataset_path must not be empty");
    gate.validate();
    for (const auto& src : sources) src.validate();
}

namespace {

Date date_field(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
        throw ConfigError(std::string("config field '") + key + "' must be a date string");
    }
    return parse_date(j[key].get<std::string>());
}

SourceConfig parse_source(const json& j) {
    SourceConfig src;
    src.kind = source_kind_from_name(j.value("kind", ""));
    src.base_url = j.value("base_url", "");
    src.repo_or_job = j.value("repo_or_job", "");
    if (j.contains("auth_token")) src.auth_token = j["auth_token"].get<std::string>();
    if (j.contains("timeout_seconds")) {
        src.timeout = std::chrono::milliseconds(
            long(j["timeout_seconds"].get<double>() * 1000.0));
    }
    src.retries = j.value("retries", src.retries);
    if (j.contains("backoff_base_ms")) {
        src.backoff_base = std::chrono::milliseconds(j["backoff_base_ms"].get<long>());
    }

    std::string env_key = "RELEASE_GATE_TOKEN_" + source_kind_name(src.kind);
    std::transform(env_key.begin(), env_key.end(), env_key.begin(),
                   [](unsigned char c) { return char(std::toupper(c)); });
    if (const char* tok = std::getenv(env_key.c_str()); tok && *tok) {
        src.auth_token = tok;
    }
    src.validate();
    return src;
}

DetectorConfig parse_detector(const json& j) {
    DetectorConfig d;
    d.k_neighbors = j.value("k_neighbors", d.k_neighbors);
    d.anomaly_threshold = j.value("anomaly_threshold", d.anomaly_threshold);
    d.review_threshold = j.value("review_threshold", d.review_threshold);
    d.tree_count = j.value("tree_count", d.tree_count);
    d.subsample_size = j.value("subsample_size", d.subsample_size);
    d.rng_seed = j.value("rng_seed", d.rng_seed);
    d.covariance_ridge = j.value("covariance_ridge", d.covariance_ridge);
    d.min_distinct = j.value("min_distinct", d.min_distinct);
    d.validate();
    return d;
}

GateConfig parse_gate(const json& j) {
    GateConfig g;
    g.warmup_releases = j.value("warmup_releases", g.warmup_releases);
    if (j.contains("ensemble_mode")) {
        std::string mode = j["ensemble_mode"].get<std::string>();
        if (mode == "lof_only") {
            g.ensemble_mode = EnsembleMode::lof_only;
        } else if (mode == "majority_vote") {
            g.ensemble_mode = EnsembleMode::majority_vote;
        } else {
            throw ConfigError("ensemble_mode must be lof_only or majority_vote");
        }
    }
    g.ensemble_quorum = j.value("ensemble_quorum", g.ensemble_quorum);
    g.contamination = j.value("contamination", g.contamination);
    if (j.contains("detector")) g.detector = parse_detector(j["detector"]);
    g.validate();
    return g;
}

} // namespace

ToolConfig parse_tool_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }

    ToolConfig cfg;
    cfg.dataset_path = j.value("dataset_path", "");
    cfg.project_start_date = date_field(j, "project_start_date");
    if (j.contains("webhook_url")) cfg.webhook_url = j["webhook_url"].get<std::string>();
    if (j.contains("gate")) cfg.gate = parse_gate(j["gate"]);
    if (j.contains("sources")) {
        if (!j["sources"].is_array()) throw ConfigError("sources must be an array");
        for (const auto& s : j["sources"]) cfg.sources.push_back(parse_source(s));
    }
    cfg.validate();
    return cfg;
}

ToolConfig load_tool_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_tool_config(ss.str());
}

} // namespace relgate
