/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sbacore/context.hpp"

namespace sbacore {

inline const std::set<std::string> kCoreEventKinds = {
    "UeReachable",  "UeUnreachable",     "LocationChanged",
    "SessionEstablished", "SessionReleased", "NfLoadSample"};

// Event kinds a Low-trust AF may subscribe to through the NEF.
inline const std::set<std::string> kLowTrustKinds = {"UeReachable", "UeUnreachable",
                                                     "LocationChanged"};

struct StoredEvent {
    std::string id;
    std::string kind;
    std::string supi;  // empty for non-UE-scoped kinds
    SimTime t = 0;
    Json payload;

    Json to_json() const;
};

enum class AnalyticsMetric { NfLoadAvg, SlicedUeCount, UeReachabilityRatio };
std::optional<AnalyticsMetric> analytics_metric_from(const std::string& s);

struct AnalyticsReport {
    AnalyticsMetric metric = AnalyticsMetric::NfLoadAvg;
    SimDuration window = 0;
    double value = 0;
    std::optional<double> forecast;
};

// Network analytics: time-ordered event store with idempotent ingest and a
// small metric registry (mean NF load, per-slice UE count, reachability
// ratio) plus a moving-average forecast over the last three windows.
class Nwdaf {
public:
    Nwdaf(RunContext ctx, NfInstanceId id);
    ~Nwdaf();

    const NfInstanceId& id() const { return id_; }

    // Idempotent per event id (hash of kind/supi/t/payload).
    bool ingest(const Json& event);
    std::optional<AnalyticsReport> analytics(AnalyticsMetric metric, SimDuration window,
                                             std::optional<Snssai> snssai = {},
                                             std::optional<SimTime> at = {}) const;

    size_t store_size() const { return events_.size(); }
    std::string export_jsonl() const;  // one CoreEvent per line, time-ordered

    using MetricFn = std::function<std::optional<double>(
        const std::vector<StoredEvent>&, SimTime from, SimTime to, const std::optional<Snssai>&)>;
    void register_metric(const std::string& name, MetricFn fn);
    std::optional<double> custom_metric(const std::string& name, SimDuration window) const;

private:
    SbiResponse handle(const SbiRequest& req);
    std::vector<StoredEvent> sorted_events() const;
    std::optional<double> metric_over(AnalyticsMetric metric, const std::vector<StoredEvent>& evs,
                                      SimTime from, SimTime to,
                                      const std::optional<Snssai>& snssai) const;

    RunContext ctx_;
    NfInstanceId id_;
    std::map<std::string, StoredEvent> events_;  // keyed by event id
    std::map<std::string, MetricFn> custom_metrics_;
};

struct AfProfile {
    std::string af_id;
    AfTrust trust = AfTrust::Low;
};

// Exposure front end: provisioned AFs subscribe to core events here; high
// trust additionally unlocks direct NF calls via a bus capability token.
class Nef {
public:
    Nef(RunContext ctx, NfInstanceId id, std::vector<AfProfile> afs);
    ~Nef();

    const NfInstanceId& id() const { return id_; }

    SbiResponse subscribe(const std::string& af_id, const std::string& kind,
                          const std::string& supi, const std::string& callback_uri);
    SbiResponse grant_capability(const std::string& af_id);

private:
    SbiResponse handle(const SbiRequest& req);

    RunContext ctx_;
    NfInstanceId id_;
    std::map<std::string, AfProfile> afs_;
};

// Minimal application function used by scenarios and tests: records every
// notification it receives and can probe NFs directly.
class SampleAf {
public:
    SampleAf(RunContext ctx, NfInstanceId id, AfTrust trust);
    ~SampleAf();

    const NfInstanceId& id() const { return id_; }

    SbiResponse subscribe_via_nef(const NfInstanceId& nef, const std::string& kind,
                                  const std::string& supi = "");
    SbiResponse request_capability(const NfInstanceId& nef);
    SbiOutcome direct_call(const NfInstanceId& target, const std::string& uri);

    const std::vector<Json>& notifications() const { return notifications_; }

private:
    RunContext ctx_;
    NfInstanceId id_;
    std::string token_;
    std::vector<Json> notifications_;
};

}  // namespace sbacore
