/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/session.hpp"

#include <algorithm>

#include "sbacore/nrf.hpp"
#include "sbacore/policy.hpp"
#include "sbacore/auth_data.hpp"
#include "sbacore/uri.hpp"

namespace sbacore {

std::string ipv4_to_string(uint32_t ip) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (ip >> 24) & 0xFF, (ip >> 16) & 0xFF,
                  (ip >> 8) & 0xFF, ip & 0xFF);
    return buf;
}

uint32_t ipv4_from_string(const std::string& s) {
    unsigned a, b, c, d;
    if (std::sscanf(s.c_str(), "%u.%u.%u.%u", &a, &b, &c, &d) != 4 || a > 255 || b > 255 ||
        c > 255 || d > 255)
        throw std::invalid_argument("bad ipv4: " + s);
    return (a << 24) | (b << 16) | (c << 8) | d;
}

Ipv4Pool::Ipv4Pool(const std::string& cidr) : cidr_(cidr) {
    size_t slash = cidr.find('/');
    if (slash == std::string::npos) throw std::invalid_argument("bad cidr: " + cidr);
    base_ = ipv4_from_string(cidr.substr(0, slash));
    int prefix = std::stoi(cidr.substr(slash + 1));
    if (prefix < 8 || prefix > 30) throw std::invalid_argument("cidr prefix must be 8..30");
    uint32_t size = 1u << (32 - prefix);
    base_ &= ~(size - 1);
    capacity_ = size - 2;  // network and broadcast excluded
}

std::optional<uint32_t> Ipv4Pool::allocate() {
    for (uint32_t host = 1; host <= capacity_; ++host) {
        uint32_t ip = base_ + host;
        if (!allocated_.count(ip)) {
            allocated_.insert(ip);
            return ip;
        }
    }
    return std::nullopt;
}

void Ipv4Pool::release(uint32_t ip) { allocated_.erase(ip); }

bool Ipv4Pool::mark_allocated(uint32_t ip) { return allocated_.insert(ip).second; }

const char* to_string(SessionState s) {
    switch (s) {
        case SessionState::Establishing: return "Establishing";
        case SessionState::Active: return "Active";
        case SessionState::Released: return "Released";
    }
    return "?";
}

const char* to_string(RuleAction a) {
    switch (a) {
        case RuleAction::Forward: return "Forward";
        case RuleAction::Drop: return "Drop";
        case RuleAction::Buffer: return "Buffer";
    }
    return "?";
}

std::optional<RuleAction> rule_action_from(const std::string& s) {
    if (s == "Forward") return RuleAction::Forward;
    if (s == "Drop") return RuleAction::Drop;
    if (s == "Buffer") return RuleAction::Buffer;
    return std::nullopt;
}

Json PduSession::to_json() const {
    return Json{{"id", id},
                {"supi", supi.to_string()},
                {"dnn", dnn.to_string()},
                {"snssai", snssai.to_string()},
                {"ue_ip", ipv4_to_string(ue_ip)},
                {"state", to_string(state)},
                {"qos", Json{{"priority", qos.priority}, {"max_bitrate_bps", qos.max_bitrate_bps}}},
                {"uplink_tunnel", Json{{"node", uplink_tunnel.node}, {"tunnel_id", uplink_tunnel.tunnel_id}}},
                {"downlink_tunnel",
                 Json{{"node", downlink_tunnel.node}, {"tunnel_id", downlink_tunnel.tunnel_id}}},
                {"access", to_string(access)}};
}

PduSession PduSession::from_json(const Json& j) {
    PduSession s;
    s.id = j.at("id").get<int>();
    s.supi = Supi::parse(j.at("supi").get<std::string>());
    s.dnn = Dnn::make(j.at("dnn").get<std::string>());
    s.snssai = Snssai::parse(j.at("snssai").get<std::string>());
    s.ue_ip = ipv4_from_string(j.at("ue_ip").get<std::string>());
    std::string st = j.at("state").get<std::string>();
    s.state = st == "Active" ? SessionState::Active
              : st == "Released" ? SessionState::Released
                                 : SessionState::Establishing;
    s.qos.priority = j.at("qos").at("priority").get<int>();
    s.qos.max_bitrate_bps = j.at("qos").at("max_bitrate_bps").get<int64_t>();
    s.uplink_tunnel = {j.at("uplink_tunnel").at("node").get<std::string>(),
                       j.at("uplink_tunnel").at("tunnel_id").get<uint32_t>()};
    s.downlink_tunnel = {j.at("downlink_tunnel").at("node").get<std::string>(),
                         j.at("downlink_tunnel").at("tunnel_id").get<uint32_t>()};
    s.access = j.at("access").get<std::string>() == "non-3gpp" ? AccessType::NonThreeGpp
                                                               : AccessType::ThreeGpp;
    return s;
}

Json UsageReport::to_json() const {
    return Json{{"uplink_packets", uplink_packets},
                {"downlink_packets", downlink_packets},
                {"uplink_bytes", uplink_bytes},
                {"downlink_bytes", downlink_bytes},
                {"dropped", dropped}};
}

// ---------------------------------------------------------------------------
// UPF

Upf::Upf(RunContext ctx, NfInstanceId id, UserPlaneFabric* fabric)
    : ctx_(std::move(ctx)), id_(std::move(id)), fabric_(fabric) {
    ctx_.bus->bind(id_, "/sx/v1", [this](const SbiRequest& r) { return handle_sx(r); });
    fabric_->attach(id_, [this](const std::string& from, uint32_t tunnel, Bytes payload) {
        handle_uplink_frame(from, tunnel, payload);
    });
}

Upf::~Upf() {
    fabric_->detach(id_);
    ctx_.bus->unbind_all(id_);
}

void Upf::attach_dn(const std::string& dnn, DnHandler handler) {
    dn_handlers_[dnn] = std::move(handler);
}

std::optional<SxRule> Upf::parse_rule(const std::string& ref, const Json& j) {
    SxRule rule;
    rule.session_ref = ref;
    std::string dir = j.value("direction", "");
    if (dir == "uplink") rule.direction = PacketDirection::Uplink;
    else if (dir == "downlink") rule.direction = PacketDirection::Downlink;
    else return std::nullopt;
    auto action = rule_action_from(j.value("action", ""));
    if (!action) return std::nullopt;
    rule.action = *action;
    rule.forward_target = j.value("forward_target", "");
    // buffering applies to downlink only
    if (rule.action == RuleAction::Buffer && rule.direction == PacketDirection::Uplink)
        return std::nullopt;
    return rule;
}

SbiResponse Upf::handle_sx(const SbiRequest& req) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto segs = split_path(req.uri);  // /sx/v1/sessions[/{ref}[/usage]]
    if (segs.size() < 3 || segs[2] != "sessions") return SbiResponse::fail(400, "bad-uri", req.uri);

    if (segs.size() == 3 && req.method == SbiMethod::Post) return sx_establish(req);
    if (segs.size() == 3 && req.method == SbiMethod::Get) {
        Json refs = Json::array();
        for (const auto& [ref, s] : sessions_) refs.push_back(ref);
        return SbiResponse::ok(Json{{"session_refs", refs}});
    }
    if (segs.size() >= 4) {
        const std::string& ref = segs[3];
        if (req.method == SbiMethod::Patch) return sx_modify(ref, req.body);
        if (req.method == SbiMethod::Delete) return sx_delete(ref);
        if (req.method == SbiMethod::Get && segs.size() == 5 && segs[4] == "usage") {
            auto u = usage(ref);
            if (!u) return SbiResponse::fail(404, "not-found", ref);
            return SbiResponse::ok(u->to_json());
        }
    }
    return SbiResponse::fail(400, "bad-uri", req.uri);
}

SbiResponse Upf::sx_establish(const SbiRequest& req) {
    try {
        const Json& b = req.body;
        std::string ref = b.at("session_ref").get<std::string>();
        if (sessions_.count(ref)) return SbiResponse::fail(409, "exists", ref);

        SessionEntry entry;
        entry.ref = ref;
        entry.dnn = b.at("dnn").get<std::string>();
        entry.ue_ip = ipv4_from_string(b.at("ue_ip").get<std::string>());
        entry.ul_tunnel_id = b.at("ul_tunnel_id").get<uint32_t>();
        entry.downlink = {b.at("dl_node").get<std::string>(), b.at("dl_tunnel_id").get<uint32_t>()};
        entry.controlling_smf = req.src;

        bool have_ul = false, have_dl = false;
        for (const auto& rj : b.at("rules")) {
            auto rule = parse_rule(ref, rj);
            if (!rule) return SbiResponse::fail(400, "invalid-rules", canonical_json(rj));
            if (rule->direction == PacketDirection::Uplink) {
                if (have_ul) return SbiResponse::fail(400, "invalid-rules", "duplicate uplink rule");
                have_ul = true;
                entry.ul_rule = *rule;
            } else {
                if (have_dl) return SbiResponse::fail(400, "invalid-rules", "duplicate downlink rule");
                have_dl = true;
                entry.dl_rule = *rule;
            }
        }
        if (!have_ul || !have_dl)
            return SbiResponse::fail(400, "invalid-rules", "need one rule per direction");
        if (by_ul_tunnel_.count(entry.ul_tunnel_id))
            return SbiResponse::fail(409, "tunnel-in-use", std::to_string(entry.ul_tunnel_id));

        by_ul_tunnel_[entry.ul_tunnel_id] = ref;
        by_ue_ip_[entry.ue_ip] = ref;
        sessions_[ref] = std::move(entry);
        return SbiResponse::ok(Json{{"session_ref", ref}}, 201);
    } catch (const std::exception& e) {
        return SbiResponse::fail(400, "bad-request", e.what());
    }
}

SbiResponse Upf::sx_modify(const std::string& ref, const Json& body) {
    auto it = sessions_.find(ref);
    if (it == sessions_.end()) return SbiResponse::fail(404, "not-found", ref);

    // validate the whole message, then apply atomically
    std::vector<SxRule> parsed;
    bool saw_ul = false, saw_dl = false;
    for (const auto& rj : body.value("rules", Json::array())) {
        auto rule = parse_rule(ref, rj);
        if (!rule) return SbiResponse::fail(400, "invalid-rules", canonical_json(rj));
        bool is_ul = rule->direction == PacketDirection::Uplink;
        if ((is_ul && saw_ul) || (!is_ul && saw_dl))
            return SbiResponse::fail(400, "invalid-rules", "duplicate direction");
        (is_ul ? saw_ul : saw_dl) = true;
        parsed.push_back(*rule);
    }
    bool flush_needed = false;
    for (const auto& rule : parsed) {
        if (rule.direction == PacketDirection::Uplink) {
            it->second.ul_rule = rule;
        } else {
            bool was_buffering = it->second.dl_rule.action == RuleAction::Buffer;
            it->second.dl_rule = rule;
            if (was_buffering && rule.action == RuleAction::Forward) flush_needed = true;
        }
    }
    if (flush_needed) flush_buffer(it->second);
    return SbiResponse::ok(Json{{"session_ref", ref}});
}

SbiResponse Upf::sx_delete(const std::string& ref) {
    auto it = sessions_.find(ref);
    if (it == sessions_.end()) return SbiResponse::fail(404, "not-found", ref);
    // frames still buffered will never be delivered
    it->second.counters.dropped += it->second.buffer.size();
    ctx_.metrics->add("upf.dropped", static_cast<int64_t>(it->second.buffer.size()));
    Json report = it->second.counters.to_json();
    by_ul_tunnel_.erase(it->second.ul_tunnel_id);
    by_ue_ip_.erase(it->second.ue_ip);
    sessions_.erase(it);
    return SbiResponse::ok(Json{{"usage", report}});
}

void Upf::flush_buffer(SessionEntry& session) {
    while (!session.buffer.empty()) {
        Bytes payload = session.buffer.front();
        if (!fabric_->deliver(id_, session.downlink.node, session.downlink.tunnel_id, payload))
            break;  // peer gone; keep remaining frames buffered
        session.buffer.pop_front();
        session.counters.downlink_packets += 1;
        session.counters.downlink_bytes += payload.size();
        ctx_.metrics->add("upf.forwarded");
    }
}

void Upf::send_downlink_data_notification(const SessionEntry& session) {
    SbiRequest req;
    req.src = id_;
    req.target = session.controlling_smf;
    req.method = SbiMethod::Post;
    req.uri = "/nsmf-pdusession/v1/sx-reports";
    req.body = Json{{"session_ref", session.ref}, {"report", "downlink-data"}};
    ctx_.bus->invoke(std::move(req));
}

PacketOutcome Upf::handle_uplink_frame(const std::string&, uint32_t tunnel_id,
                                       const Bytes& payload) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    ctx_.metrics->add("upf.injected");
    auto ref_it = by_ul_tunnel_.find(tunnel_id);
    if (ref_it == by_ul_tunnel_.end()) {
        ctx_.metrics->add("upf.dropped");
        return PacketOutcome::Dropped;
    }
    SessionEntry& session = sessions_[ref_it->second];
    if (classifier_) classifier_(PacketDirection::Uplink, session.ref, payload);
    if (session.ul_rule.action == RuleAction::Drop) {
        session.counters.dropped += 1;
        ctx_.metrics->add("upf.dropped");
        return PacketOutcome::Dropped;
    }
    auto dn = dn_handlers_.find(session.dnn);
    if (dn == dn_handlers_.end()) {
        session.counters.dropped += 1;
        ctx_.metrics->add("upf.dropped");
        return PacketOutcome::Dropped;
    }
    session.counters.uplink_packets += 1;
    session.counters.uplink_bytes += payload.size();
    ctx_.metrics->add("upf.forwarded");
    dn->second(session.ue_ip, payload);
    return PacketOutcome::Forwarded;
}

PacketOutcome Upf::inject_downlink(uint32_t ue_ip, const Bytes& payload) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    ctx_.metrics->add("upf.injected");
    auto ref_it = by_ue_ip_.find(ue_ip);
    if (ref_it == by_ue_ip_.end()) {
        ctx_.metrics->add("upf.dropped");
        return PacketOutcome::Dropped;
    }
    SessionEntry& session = sessions_[ref_it->second];
    if (classifier_) classifier_(PacketDirection::Downlink, session.ref, payload);
    switch (session.dl_rule.action) {
        case RuleAction::Drop:
            session.counters.dropped += 1;
            ctx_.metrics->add("upf.dropped");
            return PacketOutcome::Dropped;
        case RuleAction::Buffer: {
            bool was_empty = session.buffer.empty();
            session.buffer.push_back(payload);
            PacketOutcome outcome = PacketOutcome::Buffered;
            if (session.buffer.size() > kDownlinkBufferCap) {
                session.buffer.pop_front();  // oldest beyond cap
                session.counters.dropped += 1;
                ctx_.metrics->add("upf.dropped");
            }
            if (was_empty) send_downlink_data_notification(session);
            return outcome;
        }
        case RuleAction::Forward:
            if (!fabric_->deliver(id_, session.downlink.node, session.downlink.tunnel_id, payload)) {
                session.counters.dropped += 1;
                ctx_.metrics->add("upf.dropped");
                return PacketOutcome::Dropped;
            }
            session.counters.downlink_packets += 1;
            session.counters.downlink_bytes += payload.size();
            ctx_.metrics->add("upf.forwarded");
            return PacketOutcome::Forwarded;
    }
    return PacketOutcome::Dropped;
}

uint64_t Upf::total_buffered() const {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    uint64_t n = 0;
    for (const auto& [ref, s] : sessions_) n += s.buffer.size();
    return n;
}

std::optional<UsageReport> Upf::usage(const std::string& session_ref) const {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = sessions_.find(session_ref);
    if (it == sessions_.end()) return std::nullopt;
    return it->second.counters;
}

// ---------------------------------------------------------------------------
// SMF

Smf::Smf(RunContext ctx, NfInstanceId id, SmfConfig config, bool recover)
    : ctx_(std::move(ctx)), id_(std::move(id)), config_(std::move(config)) {
    for (const auto& [dnn, cidr] : config_.dnn_pools) pools_[dnn] = Ipv4Pool(cidr);
    ctx_.bus->bind(id_, "/nsmf-pdusession/v1",
                   [this](const SbiRequest& r) { return handle_sm_contexts(r); });
    ctx_.bus->create_subscription(Json{{"core_event", true}, {"kind", "UeReachable"}}, id_,
                                  "/nsmf-pdusession/v1/events");
    ctx_.bus->create_subscription(Json{{"core_event", true}, {"kind", "UeUnreachable"}}, id_,
                                  "/nsmf-pdusession/v1/events");
    if (recover) {
        restore();
        resync_with_upfs();
    }
}

Smf::~Smf() { ctx_.bus->unbind_all(id_); }

const PduSession* Smf::find_session(const std::string& supi, int session_id) const {
    auto it = sessions_.find(supi + ":" + std::to_string(session_id));
    return it == sessions_.end() ? nullptr : &it->second;
}

std::vector<PduSession> Smf::sessions_for(const std::string& supi) const {
    std::vector<PduSession> out;
    for (const auto& [key, s] : sessions_)
        if (s.supi.to_string() == supi) out.push_back(s);
    return out;
}

size_t Smf::active_sessions() const { return sessions_.size(); }

SbiOutcome Smf::sx_send(const NfInstanceId& upf, SbiMethod method, const std::string& uri,
                        Json body) {
    SbiRequest req;
    req.src = id_;
    req.target = upf;
    req.method = method;
    req.uri = uri;
    req.body = std::move(body);
    return ctx_.bus->invoke(std::move(req));
}

Json Smf::sx_rules_json(const PduSession& s, RuleAction downlink_action) const {
    return Json::array({Json{{"direction", "uplink"}, {"action", "Forward"}, {"forward_target", "dn"}},
                        Json{{"direction", "downlink"},
                             {"action", to_string(downlink_action)},
                             {"forward_target", s.downlink_tunnel.node}}});
}

SbiResponse Smf::handle_sm_contexts(const SbiRequest& req) {
    auto segs = split_path(req.uri);
    if (segs.size() >= 3 && segs[2] == "sx-reports" && req.method == SbiMethod::Post)
        return handle_sx_report(req);
    if (segs.size() >= 3 && segs[2] == "events" && req.method == SbiMethod::Post)
        return handle_event(req);
    if (segs.size() >= 3 && segs[2] == "sm-contexts" && req.method == SbiMethod::Post) {
        try {
            std::string supi = req.body.at("supi").get<std::string>();
            auto access = access_type_from(req.body.value("access", "3gpp"));
            std::string serving_node = req.body.value("serving_node", "");
            const Json& payload = req.body.at("payload");
            std::string request = payload.value("request", "");
            if (request == "establish")
                return establish(supi, access.value_or(AccessType::ThreeGpp), serving_node, payload);
            if (request == "release")
                return release(supi, payload.at("session_id").get<int>());
            return SbiResponse::fail(400, "bad-request", "unknown request " + request);
        } catch (const std::exception& e) {
            return SbiResponse::fail(400, "bad-request", e.what());
        }
    }
    return SbiResponse::fail(400, "bad-uri", req.uri);
}

SbiResponse Smf::establish(const std::string& supi, AccessType access,
                           const std::string& serving_node, const Json& request) {
    Dnn dnn = Dnn::make(request.at("dnn").get<std::string>());
    Snssai snssai = Snssai::parse(request.at("snssai").get<std::string>());

    // subscriber authorization for (dnn, snssai)
    SbiRequest sdm;
    sdm.src = id_;
    sdm.target = config_.udm;
    sdm.method = SbiMethod::Get;
    sdm.uri = "/nudm-sdm/v1/" + supi;
    auto sub = ctx_.bus->invoke(std::move(sdm));
    if (!sub.ok()) return SbiResponse::fail(403, "forbidden", "unknown subscriber " + supi);
    bool dnn_ok = false, slice_ok = false;
    for (const auto& d : sub.response.body.at("allowed_dnns"))
        if (d.get<std::string>() == dnn.to_string()) dnn_ok = true;
    for (const auto& s : sub.response.body.at("allowed_snssais"))
        if (s.get<std::string>() == snssai.to_string()) slice_ok = true;
    if (!dnn_ok || !slice_ok)
        return SbiResponse::fail(403, "forbidden", "dnn/snssai not subscribed");

    // lowest free session id, 1..15 per UE
    int session_id = 0;
    for (int candidate = 1; candidate <= 15; ++candidate) {
        if (!sessions_.count(supi + ":" + std::to_string(candidate))) {
            session_id = candidate;
            break;
        }
    }
    if (session_id == 0) return SbiResponse::fail(503, "resource-exhausted", "session ids");

    auto pool_it = pools_.find(dnn.to_string());
    if (pool_it == pools_.end())
        return SbiResponse::fail(403, "forbidden", "no pool for dnn " + dnn.to_string());
    auto ip = pool_it->second.allocate();
    if (!ip) return SbiResponse::fail(503, "resource-exhausted", "ip pool " + pool_it->second.cidr());

    PccDirectives directives =
        policy_client::fetch_sm_policy(ctx_, id_, config_.pcf, supi, dnn, snssai);

    auto upfs = nrf_client::discover(ctx_, id_, NfType::UPF);
    if (upfs.empty()) {
        pool_it->second.release(*ip);
        return SbiResponse::fail(503, "no-upf", "no UPF discoverable");
    }
    const NfInstanceId upf = upfs.front().instance_id;

    PduSession s;
    s.id = session_id;
    s.supi = Supi::parse(supi);
    s.dnn = dnn;
    s.snssai = snssai;
    s.ue_ip = *ip;
    s.qos = QosProfile{directives.priority, directives.max_bitrate_bps};
    s.access = access;
    uint32_t ns = access == AccessType::NonThreeGpp ? kNonTgppTunnelBit : 0;
    s.uplink_tunnel = {upf, next_tunnel_++ | ns};
    s.downlink_tunnel = {serving_node, next_tunnel_++ | ns};
    s.state = SessionState::Establishing;

    std::string ref = supi + ":" + std::to_string(session_id);
    Json establish_body{{"session_ref", ref},
                        {"dnn", dnn.to_string()},
                        {"ue_ip", ipv4_to_string(s.ue_ip)},
                        {"ul_tunnel_id", s.uplink_tunnel.tunnel_id},
                        {"dl_node", s.downlink_tunnel.node},
                        {"dl_tunnel_id", s.downlink_tunnel.tunnel_id},
                        {"rules", sx_rules_json(s, RuleAction::Forward)}};
    auto sx = sx_send(upf, SbiMethod::Post, "/sx/v1/sessions", std::move(establish_body));
    if (!sx.ok()) {
        pool_it->second.release(*ip);
        return SbiResponse::fail(503, "sx-failed", "UPF rejected establishment");
    }

    s.state = SessionState::Active;
    sessions_[ref] = s;
    session_upf_[ref] = upf;
    checkpoint();
    publish_session_event("SessionEstablished", s);
    ctx_.metrics->add("smf.sessions_established");

    return SbiResponse::ok(Json{{"accepted", true},
                                {"session_id", session_id},
                                {"ue_ip", ipv4_to_string(s.ue_ip)},
                                {"dnn", dnn.to_string()},
                                {"snssai", snssai.to_string()},
                                {"qos",
                                 Json{{"priority", s.qos.priority},
                                      {"max_bitrate_bps", s.qos.max_bitrate_bps}}},
                                {"upf_node", upf},
                                {"ul_tunnel_id", s.uplink_tunnel.tunnel_id},
                                {"dl_tunnel_id", s.downlink_tunnel.tunnel_id}},
                           201);
}

SbiResponse Smf::release(const std::string& supi, int session_id) {
    std::string ref = supi + ":" + std::to_string(session_id);
    auto it = sessions_.find(ref);
    if (it == sessions_.end()) return SbiResponse::fail(404, "not-found", ref);

    Json usage = Json::object();
    auto sx = sx_send(session_upf_[ref], SbiMethod::Delete, "/sx/v1/sessions/" + ref, {});
    if (sx.ok()) usage = sx.response.body.value("usage", Json::object());

    PduSession released = it->second;
    auto pool_it = pools_.find(released.dnn.to_string());
    if (pool_it != pools_.end()) pool_it->second.release(released.ue_ip);
    sessions_.erase(it);
    session_upf_.erase(ref);
    checkpoint();
    released.state = SessionState::Released;
    publish_session_event("SessionReleased", released);
    ctx_.metrics->add("smf.sessions_released");
    return SbiResponse::ok(Json{{"released", true}, {"session_id", session_id}, {"usage", usage}});
}

SbiResponse Smf::handle_sx_report(const SbiRequest& req) {
    std::string ref = req.body.value("session_ref", "");
    auto it = sessions_.find(ref);
    if (it == sessions_.end()) return SbiResponse::fail(404, "not-found", ref);
    if (req.body.value("report", "") == "downlink-data") {
        // ask the serving AMF to page the UE
        SbiRequest sdm;
        sdm.src = id_;
        sdm.target = config_.udm;
        sdm.method = SbiMethod::Get;
        sdm.uri = "/nudm-sdm/v1/" + it->second.supi.to_string();
        auto sub = ctx_.bus->invoke(std::move(sdm));
        if (sub.ok() && sub.response.body.contains("serving_amf")) {
            SbiRequest page;
            page.src = id_;
            page.target = sub.response.body.at("serving_amf").get<std::string>();
            page.method = SbiMethod::Post;
            page.uri = "/namf-comm/v1/ue-contexts/" + it->second.supi.to_string() + "/paging-trigger";
            ctx_.bus->invoke(std::move(page));
        }
    }
    return SbiResponse::ok();
}

SbiResponse Smf::handle_event(const SbiRequest& req) {
    const Json& event = req.body.at("event");
    std::string kind = event.value("kind", "");
    std::string supi = event.value("supi", "");
    if (kind == "UeReachable") on_cm_state(supi, true);
    if (kind == "UeUnreachable") on_cm_state(supi, false);
    return SbiResponse::ok();
}

void Smf::on_cm_state(const std::string& supi, bool connected) {
    for (auto& [ref, s] : sessions_) {
        if (s.supi.to_string() != supi) continue;
        Json body{{"rules", Json::array({Json{{"direction", "downlink"},
                                              {"action", connected ? "Forward" : "Buffer"},
                                              {"forward_target", s.downlink_tunnel.node}}})}};
        sx_send(session_upf_[ref], SbiMethod::Patch, "/sx/v1/sessions/" + ref, std::move(body));
    }
}

void Smf::checkpoint() {
    Json sessions = Json::array();
    for (const auto& [ref, s] : sessions_)
        sessions.push_back(Json{{"ref", ref}, {"session", s.to_json()}, {"upf", session_upf_.at(ref)}});
    Json state{{"sessions", sessions}, {"next_tunnel", next_tunnel_}};
    udsf_client::put(ctx_, id_, config_.udsf, id_, "state", to_bytes(canonical_json(state)));
}

void Smf::restore() {
    auto blob = udsf_client::get(ctx_, id_, config_.udsf, id_, "state");
    if (!blob) return;
    Json state = Json::parse(to_string(blob->value));
    next_tunnel_ = state.value("next_tunnel", 1u);
    for (const auto& e : state.at("sessions")) {
        PduSession s = PduSession::from_json(e.at("session"));
        std::string ref = e.at("ref").get<std::string>();
        sessions_[ref] = s;
        session_upf_[ref] = e.at("upf").get<std::string>();
        auto pool_it = pools_.find(s.dnn.to_string());
        if (pool_it != pools_.end()) pool_it->second.mark_allocated(s.ue_ip);
    }
}

void Smf::resync_with_upfs() {
    std::set<NfInstanceId> upfs;
    for (const auto& [ref, upf] : session_upf_) upfs.insert(upf);
    for (const auto& upf : upfs) {
        auto out = sx_send(upf, SbiMethod::Get, "/sx/v1/sessions", {});
        if (!out.ok()) continue;
        std::set<std::string> present;
        for (const auto& r : out.response.body.at("session_refs"))
            present.insert(r.get<std::string>());
        for (const auto& [ref, s] : sessions_) {
            if (session_upf_.at(ref) != upf || present.count(ref)) continue;
            Json establish_body{{"session_ref", ref},
                                {"dnn", s.dnn.to_string()},
                                {"ue_ip", ipv4_to_string(s.ue_ip)},
                                {"ul_tunnel_id", s.uplink_tunnel.tunnel_id},
                                {"dl_node", s.downlink_tunnel.node},
                                {"dl_tunnel_id", s.downlink_tunnel.tunnel_id},
                                {"rules", sx_rules_json(s, RuleAction::Forward)}};
            sx_send(upf, SbiMethod::Post, "/sx/v1/sessions", std::move(establish_body));
        }
    }
}

void Smf::publish_session_event(const char* kind, const PduSession& s) {
    ctx_.bus->publish(Json{{"core_event", true},
                           {"kind", kind},
                           {"supi", s.supi.to_string()},
                           {"t", ctx_.clock->now()},
                           {"payload",
                            Json{{"session_id", s.id},
                                 {"dnn", s.dnn.to_string()},
                                 {"snssai", s.snssai.to_string()},
                                 {"ue_ip", ipv4_to_string(s.ue_ip)}}}});
}

}  // namespace sbacore
