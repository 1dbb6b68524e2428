/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/bus.hpp"

#include <fstream>
#include <sstream>

#include "sbacore/bytes.hpp"
#include "sbacore/crypto.hpp"

namespace sbacore {

const char* to_string(SbiMethod m) {
    switch (m) {
        case SbiMethod::Get: return "GET";
        case SbiMethod::Put: return "PUT";
        case SbiMethod::Post: return "POST";
        case SbiMethod::Delete: return "DELETE";
        case SbiMethod::Patch: return "PATCH";
    }
    return "?";
}

std::optional<SbiMethod> sbi_method_from(const std::string& s) {
    if (s == "GET") return SbiMethod::Get;
    if (s == "PUT") return SbiMethod::Put;
    if (s == "POST") return SbiMethod::Post;
    if (s == "DELETE") return SbiMethod::Delete;
    if (s == "PATCH") return SbiMethod::Patch;
    return std::nullopt;
}

bool is_allowed_status(int status) {
    switch (status) {
        case 200: case 201: case 204:
        case 400: case 403: case 404: case 409:
        case 500: case 503:
            return true;
        default:
            return false;
    }
}

SbiResponse SbiResponse::ok(Json body, int status) {
    SbiResponse r;
    r.status = status;
    r.body = std::move(body);
    return r;
}

SbiResponse SbiResponse::fail(int status, const std::string& title, const std::string& detail) {
    SbiResponse r;
    r.status = status;
    r.body = Json::object();
    r.problem = Problem{title, detail};
    return r;
}

Json TraceEntry::to_json() const {
    return Json{{"t", t},     {"src", src}, {"dst", dst},
                {"method", method}, {"uri", uri}, {"status", status}};
}

void TraceLog::append(TraceEntry e) {
    std::lock_guard<std::mutex> lock(mu_);
    entries_.push_back(std::move(e));
}

std::vector<TraceEntry> TraceLog::snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_;
}

std::string TraceLog::to_jsonl() const {
    std::lock_guard<std::mutex> lock(mu_);
    std::ostringstream out;
    for (const auto& e : entries_) out << canonical_json(e.to_json()) << "\n";
    return out.str();
}

void TraceLog::write_jsonl(const std::string& path) const {
    std::ofstream f(path);
    f << to_jsonl();
}

size_t TraceLog::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
}

bool filter_matches(const Json& filter, const Json& event) {
    if (!filter.is_object()) return true;
    for (auto it = filter.begin(); it != filter.end(); ++it) {
        if (!event.contains(it.key()) || event.at(it.key()) != it.value()) return false;
    }
    return true;
}

namespace {
bool valid_service_uri(const std::string& uri) {
    // "/<service>/v1[/<resource...>]" — covers /n<nf>-<service>/v1 routes as
    // well as the /sx/v1 and /n2/v1 reference points.
    if (uri.empty() || uri[0] != '/') return false;
    size_t second = uri.find('/', 1);
    if (second == std::string::npos || second == 1) return false;
    return uri.compare(second, 3, "/v1") == 0 &&
           (uri.size() == second + 3 || uri[second + 3] == '/');
}
}  // namespace

BindResult Bus::bind(const NfInstanceId& instance, const std::string& uri_prefix, SbiHandler handler) {
    if (!valid_service_uri(uri_prefix))
        return {false, "prefix must look like /<service>/v1: " + uri_prefix};
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto& prefixes = routes_[instance];
    if (prefixes.count(uri_prefix))
        return {false, "prefix already bound: " + instance + uri_prefix};
    prefixes[uri_prefix] = std::move(handler);
    if (!instance_locks_.count(instance))
        instance_locks_[instance] = std::make_shared<std::recursive_mutex>();
    return {true, ""};
}

void Bus::unbind(const NfInstanceId& instance, const std::string& uri_prefix) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = routes_.find(instance);
    if (it == routes_.end()) return;
    it->second.erase(uri_prefix);
    if (it->second.empty()) routes_.erase(it);
}

void Bus::unbind_all(const NfInstanceId& instance) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    routes_.erase(instance);
}

bool Bus::is_bound(const NfInstanceId& instance) const {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    return routes_.count(instance) > 0;
}

bool Bus::af_gate_allows(const SbiRequest& req) const {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = principals_.find(req.src);
    if (it == principals_.end() || it->second.kind != PrincipalKind::ApplicationFunction)
        return true;
    if (req.target == nef_instance_) return true;
    if (it->second.direct_token.empty()) return false;
    auto h = req.headers.find("x-capability");
    return h != req.headers.end() && h->second == it->second.direct_token;
}

void Bus::mark_internal_prefix(const std::string& uri_prefix) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    internal_prefixes_.push_back(uri_prefix);
}

void Bus::log(const SbiRequest& req, int status, const Json& response_body) {
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        for (const auto& prefix : internal_prefixes_)
            if (req.uri.compare(0, prefix.size(), prefix) == 0) return;
    }
    trace_->append(TraceEntry{clock_->now(), req.src, req.target, to_string(req.method), req.uri,
                              status, canonical_json(req.body), canonical_json(response_body)});
}

SbiOutcome Bus::invoke(SbiRequest req, SimDuration deadline) {
    if (!af_gate_allows(req)) {
        // Blocked before reaching any endpoint; deliberately absent from the
        // message trace so trace audits see only delivered traffic.
        SbiOutcome out;
        out.transport = Transport::Forbidden;
        out.response = SbiResponse::fail(403, "forbidden", "AF requires NEF or capability token");
        return out;
    }
    if (deadline == 0) {
        SbiOutcome out;
        out.transport = Transport::Timeout;
        out.response = SbiResponse::fail(500, "timeout", "deadline exceeded");
        log(req, 408, Json::object());
        return out;
    }
    return transport_invoke(req, deadline);
}

SbiOutcome Bus::dispatch(const SbiRequest& req) {
    SbiHandler handler;
    std::shared_ptr<std::recursive_mutex> instance_lock;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        auto it = routes_.find(req.target);
        if (it != routes_.end()) {
            // longest matching prefix wins
            size_t best = 0;
            for (const auto& [prefix, h] : it->second) {
                if (req.uri.compare(0, prefix.size(), prefix) == 0 && prefix.size() >= best) {
                    best = prefix.size();
                    handler = h;
                }
            }
        }
        if (handler) instance_lock = instance_locks_[req.target];
    }
    if (!handler) {
        SbiOutcome out;
        out.transport = Transport::NotFound;
        out.response = SbiResponse::fail(404, "no-endpoint", req.target + req.uri);
        log(req, 404, Json::object());
        return out;
    }
    SbiOutcome out;
    {
        std::lock_guard<std::recursive_mutex> lock(*instance_lock);
        out.response = handler(req);
    }
    out.transport = Transport::Ok;
    if (out.response.status >= 400 && !out.response.problem)
        out.response.problem = Problem{"error", "status " + std::to_string(out.response.status)};
    if (out.response.status < 400) out.response.problem.reset();
    log(req, out.response.status, out.response.body);
    return out;
}

std::string Bus::create_subscription(Json filter, const NfInstanceId& callback_instance,
                                     const std::string& callback_uri) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    std::string id = "sub-" + std::to_string(next_sub_++);
    subscriptions_[id] = Subscription{id, std::move(filter), callback_instance, callback_uri,
                                      SubscriptionState::Live};
    return id;
}

bool Bus::cancel_subscription(const std::string& sub_id) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = subscriptions_.find(sub_id);
    if (it == subscriptions_.end()) return false;
    it->second.state = SubscriptionState::Cancelled;
    return true;
}

std::optional<Subscription> Bus::subscription(const std::string& sub_id) const {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = subscriptions_.find(sub_id);
    if (it == subscriptions_.end()) return std::nullopt;
    return it->second;
}

DeliveryResult Bus::notify(const std::string& sub_id, const Json& event) {
    Subscription sub;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        auto it = subscriptions_.find(sub_id);
        if (it == subscriptions_.end() || it->second.state == SubscriptionState::Cancelled)
            return DeliveryResult::DeliveryFailed;
        sub = it->second;
    }
    // Content-derived event id: redeliveries of the same event are
    // recognizable by the consumer.
    std::string event_id = to_hex(crypto::sha256(to_bytes(canonical_json(event)))).substr(0, 16);
    SbiRequest req;
    req.method = SbiMethod::Post;
    req.target = sub.callback_instance;
    req.uri = sub.callback_uri;
    req.src = "bus-notify";
    req.body = Json{{"event_id", event_id}, {"subscription_id", sub_id}, {"event", event}};
    SbiOutcome out = invoke(req, sim_sec(2));
    if (!out.ok()) {
        // one redelivery (same event id), then the subscription degrades
        out = invoke(req, sim_sec(2));
        if (!out.ok()) {
            std::lock_guard<std::recursive_mutex> lock(mu_);
            auto it = subscriptions_.find(sub_id);
            if (it != subscriptions_.end()) it->second.state = SubscriptionState::Degraded;
            return DeliveryResult::DeliveryFailed;
        }
    }
    return DeliveryResult::Delivered;
}

int Bus::publish(const Json& event) {
    std::vector<std::string> targets;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        for (const auto& [id, sub] : subscriptions_) {
            if (sub.state != SubscriptionState::Cancelled && filter_matches(sub.event_filter, event))
                targets.push_back(id);
        }
    }
    int delivered = 0;
    for (const auto& id : targets)
        if (notify(id, event) == DeliveryResult::Delivered) ++delivered;
    return delivered;
}

void Bus::register_principal(const NfInstanceId& instance, PrincipalKind kind, AfTrust trust) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    principals_[instance] = Principal{kind, trust, ""};
}

std::string Bus::grant_direct_token(const NfInstanceId& af_instance) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    std::string token =
        to_hex(crypto::sha256(to_bytes("cap:" + af_instance))).substr(0, 24);
    principals_[af_instance].direct_token = token;
    return token;
}

void Bus::revoke_direct_token(const NfInstanceId& af_instance) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = principals_.find(af_instance);
    if (it != principals_.end()) it->second.direct_token.clear();
}

SbiOutcome LoopbackBus::transport_invoke(const SbiRequest& req, SimDuration) {
    return dispatch(req);
}

}  // namespace sbacore
