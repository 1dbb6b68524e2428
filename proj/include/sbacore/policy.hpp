/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbacore/context.hpp"
#include "sbacore/ids.hpp"

namespace sbacore {

struct PccDirectives {
    int priority = 9;             // 1..15
    int64_t max_bitrate_bps = 0;  // 0 = unlimited
    std::string charging_tag = "default";

    Json to_json() const;
};

struct AmPolicy {
    int rfsp_index = 1;  // 1..256
    std::optional<std::vector<std::string>> service_area_restriction;
    bool forbidden = false;

    Json to_json() const;
};

struct BdtRequest {
    int64_t bytes = 0;
    SimTime earliest = 0;
    SimTime latest = 0;
};

struct BdtWindow {
    SimTime start = 0;
    SimTime end = 0;
    double mean_load = 0.0;
};

// Session-policy rule; most specific match wins (dnn+snssai > dnn > default).
struct SmPolicyRule {
    std::optional<Dnn> dnn;
    std::optional<Snssai> snssai;
    PccDirectives directives;
};

struct PcfConfig {
    std::map<std::string, AmPolicy> am_policies;  // keyed by SUPI text
    std::vector<SmPolicyRule> sm_rules;
    PccDirectives sm_default;
    int64_t bdt_offpeak_rate_bps = 1'000'000;
    std::map<std::string, Json> ue_policies;     // route preferences, echoed
    std::vector<std::string> af_allowlist;       // PolicyAuthorization

    static PcfConfig from_json(const Json& j);
};

class Pcf {
public:
    Pcf(RunContext ctx, NfInstanceId id, PcfConfig config);
    ~Pcf();

    const NfInstanceId& id() const { return id_; }

    AmPolicy am_policy(const std::string& supi) const;
    PccDirectives sm_policy(const std::string& supi, const Dnn& dnn, const Snssai& snssai);
    Json ue_policy(const std::string& supi) const;
    bool authorize_af(const std::string& af_id) const;

    // Minimum-mean-load sub-window at 1-minute start granularity; ties
    // resolve to the earliest start. Load samples come from the NWDAF.
    std::optional<BdtWindow> bdt_window(const BdtRequest& req);

private:
    SbiResponse handle_am(const SbiRequest& req);
    SbiResponse handle_sm(const SbiRequest& req);
    SbiResponse handle_bdt(const SbiRequest& req);
    SbiResponse handle_ue(const SbiRequest& req);
    SbiResponse handle_authorization(const SbiRequest& req);
    SbiResponse handle_events(const SbiRequest& req);
    std::vector<std::pair<SimTime, double>> fetch_load_series(SimTime from, SimTime to);

    RunContext ctx_;
    NfInstanceId id_;
    PcfConfig config_;
};

struct SliceEntry {
    bool available = false;
    std::vector<NfInstanceId> candidate_amfs;
};

struct SliceSelection {
    std::vector<Snssai> allowed;
    std::vector<NfInstanceId> candidate_amfs;
};

class Nssf {
public:
    Nssf(RunContext ctx, NfInstanceId id);
    ~Nssf();

    const NfInstanceId& id() const { return id_; }

    // allowed = requested ∩ subscribed ∩ available, in requested order.
    // Empty result is reported as no-allowed-slice by the endpoint.
    SliceSelection select(const std::vector<Snssai>& requested,
                          const std::vector<Snssai>& subscribed) const;
    SbiResponse availability_update(const Snssai& snssai, bool available,
                                    std::vector<NfInstanceId> candidate_amfs);
    const std::map<Snssai, SliceEntry>& catalog() const { return catalog_; }

private:
    SbiResponse handle_selection(const SbiRequest& req);
    SbiResponse handle_availability(const SbiRequest& req);

    RunContext ctx_;
    NfInstanceId id_;
    std::map<Snssai, SliceEntry> catalog_;
};

namespace policy_client {
AmPolicy fetch_am_policy(RunContext& ctx, const NfInstanceId& self, const NfInstanceId& pcf,
                         const std::string& supi);
PccDirectives fetch_sm_policy(RunContext& ctx, const NfInstanceId& self, const NfInstanceId& pcf,
                              const std::string& supi, const Dnn& dnn, const Snssai& snssai);
std::optional<SliceSelection> select_slices(RunContext& ctx, const NfInstanceId& self,
                                            const NfInstanceId& nssf,
                                            const std::vector<Snssai>& requested,
                                            const std::vector<Snssai>& subscribed);
}  // namespace policy_client

}  // namespace sbacore
