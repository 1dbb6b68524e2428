/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sbacore/context.hpp"
#include "sbacore/ids.hpp"

namespace sbacore {

enum class NfType { AMF, SMF, UPF, AUSF, UDM, PCF, NSSF, NEF, NWDAF, N3IWF, AF };
const char* to_string(NfType t);
std::optional<NfType> nf_type_from(const std::string& s);

enum class NfStatus { Registered, Suspended, Deregistered };
const char* to_string(NfStatus s);

struct NfProfile {
    NfInstanceId instance_id;
    NfType nf_type = NfType::AMF;
    std::vector<std::string> services;
    std::vector<Snssai> snssais;
    int capacity = 100;  // 0..100
    int load = 0;        // 0..100
    SimDuration heartbeat_period = sim_sec(2);
    NfStatus status = NfStatus::Registered;

    Json to_json() const;
    static NfProfile from_json(const Json& j);
};

struct DiscoveryQuery {
    NfType target_type = NfType::AMF;
    std::optional<std::string> required_service;
    std::optional<Snssai> snssai;
    NfInstanceId requester;
};

// Registry + discovery. Profiles suspend (never vanish) on missed
// heartbeats and one heartbeat restores them. Selection order: ascending
// load, then descending capacity, then instance id.
class Nrf {
public:
    Nrf(RunContext ctx, NfInstanceId instance_id);
    ~Nrf();

    const NfInstanceId& id() const { return id_; }

    // Direct API (the bus handlers call straight into these).
    SbiResponse register_profile(NfProfile profile);
    SbiResponse replace_profile(NfProfile profile);  // restart/update path
    SbiResponse heartbeat(const NfInstanceId& instance, std::optional<int> load);
    SbiResponse deregister(const NfInstanceId& instance);
    SbiResponse get_profile(const NfInstanceId& instance);
    std::vector<NfProfile> discover(const DiscoveryQuery& q);

private:
    void bind();
    void sweep();  // suspend instances whose heartbeat lapsed > 2x period
    SbiResponse handle_nfm(const SbiRequest& req);
    SbiResponse handle_disc(const SbiRequest& req);

    RunContext ctx_;
    NfInstanceId id_;
    struct Entry {
        NfProfile profile;
        SimTime last_heartbeat = 0;
    };
    std::map<NfInstanceId, Entry> instances_;
};

// Client-side helpers: every call crosses the bus so it shows up in traces.
namespace nrf_client {
bool register_nf(RunContext& ctx, const NfInstanceId& self, const NfProfile& profile);
bool reregister_nf(RunContext& ctx, const NfInstanceId& self, const NfProfile& profile);
bool send_heartbeat(RunContext& ctx, const NfInstanceId& self, std::optional<int> load = {});
std::vector<NfProfile> discover(RunContext& ctx, const NfInstanceId& self, NfType type,
                                std::optional<std::string> service = {},
                                std::optional<Snssai> snssai = {});
}  // namespace nrf_client

}  // namespace sbacore
