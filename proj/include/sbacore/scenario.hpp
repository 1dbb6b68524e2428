/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sbacore/bus.hpp"

namespace sbacore {

enum class RunMode { Deterministic, Realtime };
std::optional<RunMode> run_mode_from(const std::string& s);

struct ValidationIssue {
    std::string where;  // JSON-pointer-like location, e.g. "/events/3"
    std::string message;
    bool warning = false;
};

struct AssertionResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct RunReport {
    bool aborted = false;
    std::string abort_reason;
    std::vector<AssertionResult> assertions;
    Json metrics;
    std::string trace_jsonl;
    std::string nas_jsonl;

    bool all_passed() const;
    Json to_json() const;
};

struct RunOptions {
    RunMode mode = RunMode::Deterministic;
    std::optional<uint64_t> seed_override;
    // wall seconds per logical second in realtime mode
    double time_scale = 1.0;
};

// A declarative scenario: topology, provisioning, a timed event script and
// named expected outcomes. Deterministic runs with one seed are
// trace-identical.
class Scenario {
public:
    static Scenario from_json(Json doc, std::string base_dir = ".");
    static Scenario load_file(const std::string& path);

    std::vector<ValidationIssue> validate() const;
    RunReport run(const RunOptions& options = {}) const;

    const Json& doc() const { return doc_; }
    std::string name() const { return doc_.value("name", "unnamed"); }

private:
    Json doc_;
    std::string base_dir_;
};

}  // namespace sbacore
