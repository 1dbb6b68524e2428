/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbacore/context.hpp"
#include "sbacore/ids.hpp"
#include "sbacore/nas.hpp"

namespace sbacore {

enum class RmState { Deregistered, Registered };
enum class CmState { Idle, Connected };
const char* to_string(RmState s);
const char* to_string(CmState s);

struct UeContext {
    Supi supi;
    RmState rm = RmState::Deregistered;
    CmState cm = CmState::Idle;
    AccessType access = AccessType::ThreeGpp;
    std::string serving_node;
    std::vector<Snssai> allowed_nssai;
    std::optional<SecurityCtx> security;
    SimTime periodic_deadline = 0;

    Json to_json() const;
    static UeContext from_json(const Json& j);
};

struct AmfConfig {
    NfInstanceId ausf;
    NfInstanceId udm;
    NfInstanceId udsf;
    NfInstanceId pcf;
    NfInstanceId nssf;
    SimDuration periodic_update_period = sim_sec(30);
    SimDuration paging_timeout = sim_sec(2);
};

// Access and Mobility Management Function. Terminates N1 from both access
// types, drives AUSF/UDM/NSSF/PCF during registration, and checkpoints every
// context mutation to the UDSF before answering, so a restarted instance
// with the same id resumes serving its UEs from the store.
class Amf {
public:
    Amf(RunContext ctx, NfInstanceId id, AmfConfig config);
    ~Amf();

    const NfInstanceId& id() const { return id_; }

    std::optional<UeContext> context(const std::string& supi);  // recovers if needed
    SbiResponse page(const std::string& supi);
    size_t context_count() const { return contexts_.size(); }
    int load_hint() const { return static_cast<int>(std::min<size_t>(contexts_.size(), 100)); }

    // Cancels timers and unbinds; the destructor also does this. Used by the
    // scenario runner to model a crash.
    void shutdown();

private:
    SbiResponse handle_comm(const SbiRequest& req);
    SbiResponse handle_n1(const std::string& supi, const SbiRequest& req);
    SbiResponse on_registration_request(const std::string& supi, const NasMessage& msg,
                                        AccessType access, const std::string& serving_node);
    SbiResponse on_auth_response(const std::string& supi, const NasMessage& msg);
    SbiResponse on_service_request(UeContext& ctx, const NasMessage& msg);
    SbiResponse on_periodic_update(UeContext& ctx, const NasMessage& msg);
    SbiResponse on_deregistration(UeContext& ctx, const NasMessage& msg);
    SbiResponse on_session_transport(UeContext& ctx, const NasMessage& msg);

    SbiResponse nas_reply(const UeContext* ctx, NasKind kind, const std::string& supi,
                          Json payload, AccessType access);
    SbiResponse reject(const std::string& supi, const std::string& cause, AccessType access,
                       UeContext* ctx = nullptr);

    UeContext* ensure_context(const std::string& supi);
    void checkpoint(const UeContext& ctx);
    void arm_periodic_timer(const std::string& supi);
    void implicit_deregistration(const std::string& supi);
    void set_cm_state(UeContext& ctx, CmState cm);
    void publish_ue_event(const char* kind, const UeContext& ctx);
    void log_nas(const NasMessage& msg, bool downlink, AccessType access);

    RunContext ctx_;
    NfInstanceId id_;
    AmfConfig config_;
    std::map<std::string, UeContext> contexts_;

    struct PendingAuth {
        std::vector<Snssai> requested_nssai;
        AccessType access = AccessType::ThreeGpp;
        std::string serving_node;
    };
    std::map<std::string, PendingAuth> pending_auth_;
    std::map<std::string, uint64_t> periodic_timers_;
    std::map<std::string, uint64_t> paging_timers_;
    bool shut_down_ = false;
};

}  // namespace sbacore
