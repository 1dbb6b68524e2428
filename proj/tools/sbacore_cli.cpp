/* SPDX-License-Identifier: Apache-2.0 */
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sbacore/scenario.hpp"

using namespace sbacore;
namespace fs = std::filesystem;

#ifndef SBACORE_SCENARIO_DIR
#define SBACORE_SCENARIO_DIR "scenarios"
#endif

namespace {

std::string scenario_dir() {
    if (const char* env = std::getenv("SBACORE_SCENARIO_DIR")) return env;
    return SBACORE_SCENARIO_DIR;
}

bool verbose() {
    const char* env = std::getenv("SBACORE_LOG");
    return env && std::string(env) != "" && std::string(env) != "quiet";
}

// Bare names resolve against the bundled scenario directory.
std::string resolve_scenario(const std::string& arg) {
    if (fs::exists(arg)) return arg;
    fs::path bundled = fs::path(scenario_dir()) / arg;
    if (fs::exists(bundled)) return bundled.string();
    bundled += ".json";
    if (fs::exists(bundled)) return bundled.string();
    return arg;
}

int cmd_validate(const std::string& path) {
    Scenario scenario = Scenario::load_file(resolve_scenario(path));
    auto issues = scenario.validate();
    bool failed = false;
    for (const auto& issue : issues) {
        std::cout << (issue.warning ? "warning" : "error") << " at " << issue.where << ": "
                  << issue.message << "\n";
        failed |= !issue.warning;
    }
    if (!failed) std::cout << "ok: " << scenario.name() << "\n";
    return failed ? 1 : 0;
}

int cmd_run(const std::string& path, const RunOptions& options, const std::string& trace_out,
            const std::string& metrics_out, const std::string& nas_out) {
    Scenario scenario = Scenario::load_file(resolve_scenario(path));
    auto issues = scenario.validate();
    for (const auto& issue : issues) {
        if (!issue.warning) {
            std::cerr << "validation error at " << issue.where << ": " << issue.message << "\n";
            return 2;
        }
        std::cerr << "warning at " << issue.where << ": " << issue.message << "\n";
    }

    RunReport report = scenario.run(options);
    if (report.aborted) {
        std::cerr << "run aborted: " << report.abort_reason << "\n";
        return 3;
    }
    for (const auto& a : report.assertions)
        std::cout << (a.pass ? "PASS" : "FAIL") << " " << a.name
                  << (a.pass || a.detail.empty() ? "" : "  (" + a.detail + ")") << "\n";
    if (verbose()) std::cout << report.metrics.dump(2) << "\n";

    if (!trace_out.empty()) std::ofstream(trace_out) << report.trace_jsonl;
    if (!metrics_out.empty()) std::ofstream(metrics_out) << canonical_json(report.to_json()) << "\n";
    if (!nas_out.empty()) std::ofstream(nas_out) << report.nas_jsonl;

    std::cout << (report.all_passed() ? "all assertions passed" : "assertion failures") << " ("
              << scenario.name() << ")\n";
    return report.all_passed() ? 0 : 1;
}

int cmd_list() {
    fs::path dir(scenario_dir());
    if (!fs::is_directory(dir)) {
        std::cerr << "no scenario directory at " << dir << "\n";
        return 1;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        try {
            Scenario s = Scenario::load_file(entry.path().string());
            if (!s.doc().is_object() || !s.doc().contains("topology")) continue;  // provisioning file
            std::cout << entry.path().filename().string() << "  " << s.name() << "\n";
        } catch (const std::exception&) {
            continue;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale 5G SBA core with a LoRaWAN non-3GPP access network"};
    app.require_subcommand(1);

    std::string scenario_path, mode_name = "deterministic";
    std::string trace_out, metrics_out, nas_out;
    uint64_t seed = 0;
    bool seed_set = false;
    double time_scale = 1.0;

    auto* run = app.add_subcommand("run", "Run a scenario and evaluate its assertions");
    run->add_option("scenario", scenario_path, "Scenario file or bundled name")->required();
    run->add_option("--seed", seed, "Override the scenario seed")->each([&](const std::string&) {
        seed_set = true;
    });
    run->add_option("--mode", mode_name, "deterministic|realtime")
        ->check(CLI::IsMember({"deterministic", "realtime"}));
    run->add_option("--trace", trace_out, "Write the message trace (JSON lines)");
    run->add_option("--metrics", metrics_out, "Write the run report (JSON)");
    run->add_option("--nas", nas_out, "Write the NAS log (JSON lines)");
    run->add_option("--time-scale", time_scale,
                    "Realtime mode: wall seconds per logical second (default 1.0)");

    auto* validate = app.add_subcommand("validate", "Check a scenario without running it");
    validate->add_option("scenario", scenario_path, "Scenario file or bundled name")->required();

    app.add_subcommand("list-scenarios", "List bundled scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("validate")) return cmd_validate(scenario_path);
        if (app.got_subcommand("list-scenarios")) return cmd_list();
        RunOptions options;
        options.mode = run_mode_from(mode_name).value_or(RunMode::Deterministic);
        if (seed_set) options.seed_override = seed;
        options.time_scale = time_scale;
        return cmd_run(scenario_path, options, trace_out, metrics_out, nas_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
