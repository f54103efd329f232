#pragma once

#include "relgate/gate.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace relgate {

/// Webhook message body. Serializes with a top-level `text` field so any
/// Slack-compatible incoming webhook renders it directly.
struct NotificationPayload {
    std::string text;
    std::string verdict;
    int candidate_id = 0;
    std::vector<std::pair<std::string, double>> top_features; // at most 3
    std::map<std::string, double> scores;

    std::string to_json_string() const;
};

NotificationPayload make_notification(const GateDecision& decision);

struct DeliveryResult {
    bool delivered = false;
    std::string detail;
};

/// POSTs the payload as JSON. One retry on 5xx or transport failure; the
/// result is informational only and never affects the gate outcome.
DeliveryResult notify(const std::string& webhook_url, const NotificationPayload& payload);

} // namespace relgate
