#pragma once

#include "relgate/collectors.hpp"
#include "relgate/gate.hpp"

#include <optional>
#include <string>
#include <vector>

namespace relgate {

/// Whole-tool configuration, loaded from one JSON file. Auth tokens may be
/// supplied (or overridden) via RELEASE_GATE_TOKEN_<KIND> environment
/// variables so they stay out of committed config files.
struct ToolConfig {
    std::string dataset_path;
    std::vector<SourceConfig> sources;
    GateConfig gate;
    std::optional<std::string> webhook_url;
    Date project_start_date;

    std::string candidate_path() const { return dataset_path + ".candidate.json"; }

    void validate() const;
};

ToolConfig load_tool_config(const std::string& path);

/// Parses a config JSON document (exposed separately for tests).
ToolConfig parse_tool_config(const std::string& json_text);

} // namespace relgate
