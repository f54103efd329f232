#include "relgate/commands.hpp"
#include "relgate/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"release-gate: anomaly-gated release checks over DevOps toolchain metrics"};
    app.require_subcommand(1);

    std::string config_path = "./release-gate.json";
    app.add_option("--config", config_path, "Path to the tool config JSON")
        ->capture_default_str();

    std::string date_text;
    auto* collect = app.add_subcommand(
        "collect", "Collect metrics for the window ending at --date and stage a candidate");
    collect->add_option("--date", date_text, "Release date (YYYY-MM-DD)")->required();

    auto* check = app.add_subcommand(
        "check", "Run the anomaly gate on the staged candidate (exit 0 pass, 1 anomaly, "
                 "2 review, 3 error)");

    auto* append = app.add_subcommand(
        "append", "Append the checked candidate to the dataset");

    relgate::ReportOptions report_options;
    auto* report = app.add_subcommand("report", "Write score or boundary CSV reports");
    report->add_option("--mode", report_options.mode, "scores or boundaries")->required();
    report->add_option("--fx", report_options.feature_x, "First feature number (1..6)")
        ->capture_default_str();
    report->add_option("--fy", report_options.feature_y, "Second feature number (1..6)")
        ->capture_default_str();
    report->add_option("--resolution", report_options.resolution, "Grid resolution")
        ->capture_default_str();
    report->add_option("--out", report_options.out_dir, "Output directory")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return relgate::kExitError;
    }

    relgate::ToolConfig config;
    try {
        config = relgate::load_tool_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return relgate::kExitError;
    }

    if (collect->parsed()) {
        relgate::Date date;
        try {
            date = relgate::parse_date(date_text);
        } catch (const std::exception& e) {
            std::cerr << e.what() << "\n";
            return relgate::kExitError;
        }
        return relgate::cmd_collect(config, date, std::cout, std::cerr);
    }
    if (check->parsed()) {
        return relgate::cmd_check(config, std::cout, std::cerr);
    }
    if (append->parsed()) {
        return relgate::cmd_append(config, std::cout, std::cerr);
    }
    if (report->parsed()) {
        return relgate::cmd_report(config, report_options, std::cout, std::cerr);
    }
    return relgate::kExitError;
}
