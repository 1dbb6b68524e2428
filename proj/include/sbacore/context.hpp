/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "sbacore/bus.hpp"
#include "sbacore/clock.hpp"

namespace sbacore {

// Scenario-wide counters; keys are dotted paths like "upf.forwarded".
class Metrics {
public:
    void add(const std::string& key, int64_t delta = 1);
    void set(const std::string& key, int64_t value);
    int64_t get(const std::string& key) const;
    Json to_json() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, int64_t> counters_;
};

// One record per NAS message observed at the AMF boundary; the registration
// sequence and access-parity assertions read this log.
struct NasRecord {
    SimTime t = 0;
    std::string supi;
    std::string kind;
    std::string direction;  // "ue-to-core" | "core-to-ue"
    std::string access;     // "3gpp" | "non-3gpp"
};

class NasLog {
public:
    void append(NasRecord r);
    std::vector<NasRecord> snapshot() const;
    std::vector<std::string> kinds_for(const std::string& supi) const;

private:
    mutable std::mutex mu_;
    std::vector<NasRecord> records_;
};

// Everything an NF actor needs to live in a scenario.
struct RunContext {
    Clock* clock = nullptr;
    Rng* rng = nullptr;
    Bus* bus = nullptr;
    Metrics* metrics = nullptr;
    NasLog* nas_log = nullptr;
    NfInstanceId nrf;  // well-known registry instance
};

}  // namespace sbacore
