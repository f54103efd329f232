#include "relgate/notify.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>

namespace relgate {

using nlohmann::json;

namespace {

std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

std::string NotificationPayload::to_json_string() const {
    json j;
    j["text"] = text;
    j["verdict"] = verdict;
    j["candidate_id"] = candidate_id;
    json feats = json::array();
    for (const auto& [name, z] : top_features) {
        feats.push_back({{"feature", name}, {"z", z}});
    }
    j["top_features"] = feats;
    j["scores"] = scores;
    return j.dump();
}

NotificationPayload make_notification(const GateDecision& decision) {
    NotificationPayload p;
    p.verdict = verdict_name(decision.verdict);
    p.candidate_id = decision.candidate_id;
    p.scores = decision.per_detector_scores;
    for (const auto& e : decision.explanation) {
        if (p.top_features.size() == 3) break;
        p.top_features.emplace_back(e.feature, e.z);
    }

    std::string text = "Release " + std::to_string(decision.candidate_id) + ": " +
                       p.verdict;
    if (decision.lof_score) {
        text += " (LOF " + short_number(*decision.lof_score);
        if (!p.top_features.empty()) {
            text += ", top features";
            for (const auto& [name, z] : p.top_features) {
                text += " " + name + "=" + short_number(z);
            }
        }
        text += ")";
    } else if (!decision.reason.empty()) {
        text += " (" + decision.reason + ")";
    }
    p.text = text;
    return p;
}

DeliveryResult notify(const std::string& webhook_url, const NotificationPayload& payload) {
    std::string body = payload.to_json_string();
    std::string path;
    try {
        auto scheme_end = webhook_url.find("://");
        if (scheme_end == std::string::npos) {
            return {false, "malformed webhook url '" + webhook_url + "'"};
        }
        auto path_start = webhook_url.find('/', scheme_end + 3);
        std::string host = path_start == std::string::npos
                               ? webhook_url
                               : webhook_url.substr(0, path_start);
        path = path_start == std::string::npos ? "/" : webhook_url.substr(path_start);

        std::string last;
        for (int attempt = 0; attempt < 2; ++attempt) {
            httplib::Client client(host);
            client.set_connection_timeout(std::chrono::seconds(10));
            client.set_read_timeout(std::chrono::seconds(10));
            auto res = client.Post(path, body, "application/json");
            if (res && res->status >= 200 && res->status < 300) {
                return {true, "delivered"};
            }
            if (res && res->status < 500) {
                return {false, "webhook rejected with HTTP " + std::to_string(res->status)};
            }
            last = res ? "HTTP " + std::to_string(res->status)
                       : "transport error: " + httplib::to_string(res.error());
        }
        return {false, "webhook failed after retry: " + last};
    } catch (const std::exception& e) {
        return {false, std::string("webhook failure: ") + e.what()};
    }
}

} // namespace relgate
