/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sbacore/clock.hpp"
#include "sbacore/ids.hpp"

namespace sbacore {

using Json = nlohmann::json;

// Canonical serialization used everywhere a document goes on a wire or into
// a trace: compact UTF-8 JSON with lexicographically sorted keys.
inline std::string canonical_json(const Json& j) { return j.dump(); }

enum class SbiMethod { Get, Put, Post, Delete, Patch };
const char* to_string(SbiMethod m);
std::optional<SbiMethod> sbi_method_from(const std::string& s);

struct SbiRequest {
    SbiMethod method = SbiMethod::Get;
    NfInstanceId target;  // destination NF instance
    std::string uri;      // "/n<nf>-<service>/v1/<resource...>"
    std::map<std::string, std::string> headers;
    Json body;

    // Filled in by the bus on dispatch.
    NfInstanceId src;
};

struct Problem {
    std::string title;
    std::string detail;
};

struct SbiResponse {
    int status = 200;
    Json body;
    std::optional<Problem> problem;

    static SbiResponse ok(Json body = Json::object(), int status = 200);
    static SbiResponse fail(int status, const std::string& title, const std::string& detail = "");
};

bool is_allowed_status(int status);

enum class Transport { Ok, NotFound, Timeout, Forbidden };

struct SbiOutcome {
    Transport transport = Transport::Ok;
    SbiResponse response;

    bool delivered() const { return transport == Transport::Ok; }
    bool ok() const { return delivered() && response.status < 400; }
};

using SbiHandler = std::function<SbiResponse(const SbiRequest&)>;

struct TraceEntry {
    SimTime t = 0;
    std::string src;
    std::string dst;
    std::string method;
    std::string uri;
    int status = 0;
    // Kept for in-memory audits (payload-sentinel and key-custody scans);
    // not part of the exported trace line.
    std::string request_body;
    std::string response_body;

    Json to_json() const;
};

// Append-only message trace; one JSON object per line when exported.
class TraceLog {
public:
    void append(TraceEntry e);
    std::vector<TraceEntry> snapshot() const;
    void write_jsonl(const std::string& path) const;
    std::string to_jsonl() const;
    size_t size() const;

private:
    mutable std::mutex mu_;
    std::vector<TraceEntry> entries_;
};

enum class SubscriptionState { Live, Degraded, Cancelled };

struct Subscription {
    std::string id;
    Json event_filter;  // fields that must match the event document exactly
    NfInstanceId callback_instance;
    std::string callback_uri;
    SubscriptionState state = SubscriptionState::Live;
};

enum class DeliveryResult { Delivered, DeliveryFailed };

// Returns true when every field present in filter equals the corresponding
// event field (empty filter matches everything).
bool filter_matches(const Json& filter, const Json& event);

enum class PrincipalKind { CoreNf, ApplicationFunction };
enum class AfTrust { High, Low };

struct BindResult {
    bool ok = false;
    std::string error;
};

// Service-based message fabric. Routing key is (target instance, longest
// bound URI prefix). Dispatch serializes per target instance, which keeps
// each endpoint's handler single-threaded in the realtime transport too.
class Bus {
public:
    explicit Bus(Clock* clock, TraceLog* trace) : clock_(clock), trace_(trace) {}
    virtual ~Bus() = default;

    BindResult bind(const NfInstanceId& instance, const std::string& uri_prefix, SbiHandler handler);
    void unbind(const NfInstanceId& instance, const std::string& uri_prefix);
    void unbind_all(const NfInstanceId& instance);
    bool is_bound(const NfInstanceId& instance) const;

    SbiOutcome invoke(SbiRequest req, SimDuration deadline = sim_sec(5));

    // Subscriptions (subscribe/notify leg of the fabric).
    std::string create_subscription(Json filter, const NfInstanceId& callback_instance,
                                    const std::string& callback_uri);
    bool cancel_subscription(const std::string& sub_id);
    std::optional<Subscription> subscription(const std::string& sub_id) const;
    DeliveryResult notify(const std::string& sub_id, const Json& event);
    int publish(const Json& event);  // notify every live matching subscription

    // Exposure trust gate: AF principals may only reach NEF-owned endpoints
    // unless they hold a direct-call capability token.
    void register_principal(const NfInstanceId& instance, PrincipalKind kind,
                            AfTrust trust = AfTrust::High);
    void set_nef_instance(const NfInstanceId& nef) { nef_instance_ = nef; }
    std::string grant_direct_token(const NfInstanceId& af_instance);
    void revoke_direct_token(const NfInstanceId& af_instance);

    // Combined-deployment modeling: requests to these prefixes dispatch
    // normally but stay off the message trace, the way an intra-process
    // call between co-deployed functions would.
    void mark_internal_prefix(const std::string& uri_prefix);

    Clock& clock() { return *clock_; }
    TraceLog& trace() { return *trace_; }

protected:
    // Transport-specific carry of a request to the routing table.
    virtual SbiOutcome transport_invoke(const SbiRequest& req, SimDuration deadline) = 0;

    // Shared routing: longest-prefix match + per-instance serialization.
    SbiOutcome dispatch(const SbiRequest& req);

    Clock* clock_;
    TraceLog* trace_;

private:
    bool af_gate_allows(const SbiRequest& req) const;
    void log(const SbiRequest& req, int status, const Json& response_body);

    mutable std::recursive_mutex mu_;
    // instance -> prefix -> handler; prefixes matched longest-first
    std::map<NfInstanceId, std::map<std::string, SbiHandler>> routes_;
    std::map<NfInstanceId, std::shared_ptr<std::recursive_mutex>> instance_locks_;
    std::map<std::string, Subscription> subscriptions_;
    uint64_t next_sub_ = 1;

    struct Principal {
        PrincipalKind kind = PrincipalKind::CoreNf;
        AfTrust trust = AfTrust::High;
        std::string direct_token;
    };
    std::map<NfInstanceId, Principal> principals_;
    std::vector<std::string> internal_prefixes_;
    NfInstanceId nef_instance_;
};

// In-process transport: synchronous dispatch on the caller's thread. The
// default, and the only transport used in deterministic mode.
class LoopbackBus : public Bus {
public:
    using Bus::Bus;

protected:
    SbiOutcome transport_invoke(const SbiRequest& req, SimDuration deadline) override;
};

}  // namespace sbacore
