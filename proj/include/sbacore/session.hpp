/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sbacore/context.hpp"
#include "sbacore/ids.hpp"
#include "sbacore/nas.hpp"
#include "sbacore/userplane.hpp"

namespace sbacore {

std::string ipv4_to_string(uint32_t ip);
uint32_t ipv4_from_string(const std::string& s);

// Lowest-free host-address allocator over one CIDR block (network and
// broadcast addresses excluded).
class Ipv4Pool {
public:
    Ipv4Pool() = default;
    explicit Ipv4Pool(const std::string& cidr);  // e.g. "10.60.0.0/24"

    std::optional<uint32_t> allocate();
    void release(uint32_t ip);
    bool mark_allocated(uint32_t ip);  // for checkpoint restore
    size_t capacity() const { return capacity_; }
    size_t in_use() const { return allocated_.size(); }
    const std::string& cidr() const { return cidr_; }

private:
    std::string cidr_;
    uint32_t base_ = 0;
    size_t capacity_ = 0;
    std::set<uint32_t> allocated_;
};

enum class SessionState { Establishing, Active, Released };
const char* to_string(SessionState s);

struct QosProfile {
    int priority = 9;
    int64_t max_bitrate_bps = 0;
};

struct TunnelEndpoint {
    std::string node;
    uint32_t tunnel_id = 0;
};

struct PduSession {
    int id = 0;  // 1..15 per UE
    Supi supi;
    Dnn dnn;
    Snssai snssai;
    uint32_t ue_ip = 0;
    SessionState state = SessionState::Establishing;
    QosProfile qos;
    TunnelEndpoint uplink_tunnel;    // AN -> UPF, keyed at the UPF
    TunnelEndpoint downlink_tunnel;  // UPF -> AN, keyed at the AN node
    AccessType access = AccessType::ThreeGpp;

    Json to_json() const;
    static PduSession from_json(const Json& j);
};

enum class RuleAction { Forward, Drop, Buffer };
const char* to_string(RuleAction a);
std::optional<RuleAction> rule_action_from(const std::string& s);

enum class PacketDirection { Uplink, Downlink };

struct SxRule {
    std::string session_ref;
    PacketDirection direction = PacketDirection::Uplink;
    RuleAction action = RuleAction::Forward;
    std::string forward_target;  // downlink: AN node id; uplink: "dn"
};

struct UsageReport {
    uint64_t uplink_packets = 0;
    uint64_t downlink_packets = 0;
    uint64_t uplink_bytes = 0;
    uint64_t downlink_bytes = 0;
    uint64_t dropped = 0;

    Json to_json() const;
};

enum class PacketOutcome { Forwarded, Buffered, Dropped };

// User Plane Function: forwarding table driven purely by Sx messages from
// the SMF, per-session downlink buffering (cap 128, drop-oldest), usage
// counting and a pluggable payload classifier hook (no-op by default).
class Upf {
public:
    static constexpr size_t kDownlinkBufferCap = 128;

    using DnHandler = std::function<void(uint32_t ue_ip, const Bytes& payload)>;

    Upf(RunContext ctx, NfInstanceId id, UserPlaneFabric* fabric);
    ~Upf();

    const NfInstanceId& id() const { return id_; }

    void attach_dn(const std::string& dnn, DnHandler handler);
    PacketOutcome inject_downlink(uint32_t ue_ip, const Bytes& payload);
    PacketOutcome handle_uplink_frame(const std::string& from_node, uint32_t tunnel_id,
                                      const Bytes& payload);

    void set_classifier(std::function<void(PacketDirection, const std::string&, const Bytes&)> fn) {
        classifier_ = std::move(fn);
    }

    uint64_t total_buffered() const;
    std::optional<UsageReport> usage(const std::string& session_ref) const;
    size_t session_count() const { return sessions_.size(); }

private:
    struct SessionEntry {
        std::string ref;
        std::string dnn;
        uint32_t ue_ip = 0;
        uint32_t ul_tunnel_id = 0;
        TunnelEndpoint downlink;
        SxRule ul_rule, dl_rule;
        std::deque<Bytes> buffer;
        UsageReport counters;
        NfInstanceId controlling_smf;
    };

    SbiResponse handle_sx(const SbiRequest& req);
    SbiResponse sx_establish(const SbiRequest& req);
    SbiResponse sx_modify(const std::string& ref, const Json& body);
    SbiResponse sx_delete(const std::string& ref);
    void flush_buffer(SessionEntry& session);
    void send_downlink_data_notification(const SessionEntry& session);
    static std::optional<SxRule> parse_rule(const std::string& ref, const Json& j);

    RunContext ctx_;
    NfInstanceId id_;
    UserPlaneFabric* fabric_;
    mutable std::recursive_mutex mu_;  // realtime mode: sx vs data-path threads
    std::map<std::string, SessionEntry> sessions_;
    std::map<uint32_t, std::string> by_ul_tunnel_;
    std::map<uint32_t, std::string> by_ue_ip_;
    std::map<std::string, DnHandler> dn_handlers_;
    std::function<void(PacketDirection, const std::string&, const Bytes&)> classifier_;
};

struct SmfConfig {
    std::map<std::string, std::string> dnn_pools;  // dnn -> CIDR
    NfInstanceId udm;
    NfInstanceId pcf;
    NfInstanceId udsf;
};

// Session Management Function: session control, IP allocation, Sx control
// of the UPF, state checkpointed to the UDSF for restart recovery.
class Smf {
public:
    Smf(RunContext ctx, NfInstanceId id, SmfConfig config, bool recover = false);
    ~Smf();

    const NfInstanceId& id() const { return id_; }

    const PduSession* find_session(const std::string& supi, int session_id) const;
    std::vector<PduSession> sessions_for(const std::string& supi) const;
    size_t active_sessions() const;

private:
    SbiResponse handle_sm_contexts(const SbiRequest& req);
    SbiResponse establish(const std::string& supi, AccessType access,
                          const std::string& serving_node, const Json& request);
    SbiResponse release(const std::string& supi, int session_id);
    SbiResponse handle_sx_report(const SbiRequest& req);
    SbiResponse handle_event(const SbiRequest& req);
    void on_cm_state(const std::string& supi, bool connected);
    void checkpoint();
    void restore();
    void resync_with_upfs();
    void publish_session_event(const char* kind, const PduSession& s);

    Json sx_rules_json(const PduSession& s, RuleAction downlink_action) const;
    SbiOutcome sx_send(const NfInstanceId& upf, SbiMethod method, const std::string& uri,
                       Json body);

    RunContext ctx_;
    NfInstanceId id_;
    SmfConfig config_;
    std::map<std::string, Ipv4Pool> pools_;
    // key: supi + "/" + id
    std::map<std::string, PduSession> sessions_;
    std::map<std::string, NfInstanceId> session_upf_;
    uint32_t next_tunnel_ = 1;
};

}  // namespace sbacore
