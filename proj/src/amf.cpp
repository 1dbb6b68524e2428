/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/amf.hpp"

#include "sbacore/auth_data.hpp"
#include "sbacore/nrf.hpp"
#include "sbacore/policy.hpp"
#include "sbacore/uri.hpp"

namespace sbacore {

const char* to_string(RmState s) { return s == RmState::Registered ? "Registered" : "Deregistered"; }
const char* to_string(CmState s) { return s == CmState::Connected ? "Connected" : "Idle"; }

Json UeContext::to_json() const {
    Json j{{"supi", supi.to_string()},
           {"rm", to_string(rm)},
           {"cm", to_string(cm)},
           {"access", to_string(access)},
           {"serving_node", serving_node},
           {"periodic_deadline_us", periodic_deadline}};
    Json nssai = Json::array();
    for (const auto& s : allowed_nssai) nssai.push_back(s.to_string());
    j["allowed_nssai"] = nssai;
    if (security) {
        j["security"] = Json{{"session_key_hex", to_hex(security->session_key)},
                             {"uplink_counter", security->uplink_counter},
                             {"downlink_counter", security->downlink_counter}};
    }
    return j;
}

UeContext UeContext::from_json(const Json& j) {
    UeContext c;
    c.supi = Supi::parse(j.at("supi").get<std::string>());
    c.rm = j.at("rm").get<std::string>() == "Registered" ? RmState::Registered
                                                         : RmState::Deregistered;
    c.cm = j.at("cm").get<std::string>() == "Connected" ? CmState::Connected : CmState::Idle;
    c.access = j.at("access").get<std::string>() == "non-3gpp" ? AccessType::NonThreeGpp
                                                               : AccessType::ThreeGpp;
    c.serving_node = j.at("serving_node").get<std::string>();
    for (const auto& s : j.at("allowed_nssai"))
        c.allowed_nssai.push_back(Snssai::parse(s.get<std::string>()));
    c.periodic_deadline = j.at("periodic_deadline_us").get<SimTime>();
    if (j.contains("security")) {
        SecurityCtx sec;
        sec.session_key = from_hex(j.at("security").at("session_key_hex").get<std::string>());
        sec.uplink_counter = j.at("security").at("uplink_counter").get<uint64_t>();
        sec.downlink_counter = j.at("security").at("downlink_counter").get<uint64_t>();
        c.security = std::move(sec);
    }
    return c;
}

Amf::Amf(RunContext ctx, NfInstanceId id, AmfConfig config)
    : ctx_(std::move(ctx)), id_(std::move(id)), config_(std::move(config)) {
    ctx_.bus->bind(id_, "/namf-comm/v1", [this](const SbiRequest& r) { return handle_comm(r); });
}

Amf::~Amf() { shutdown(); }

void Amf::shutdown() {
    if (shut_down_) return;
    shut_down_ = true;
    for (auto& [supi, timer] : periodic_timers_) ctx_.clock->cancel(timer);
    for (auto& [supi, timer] : paging_timers_) ctx_.clock->cancel(timer);
    periodic_timers_.clear();
    paging_timers_.clear();
    ctx_.bus->unbind_all(id_);
}

void Amf::log_nas(const NasMessage& msg, bool downlink, AccessType access) {
    ctx_.nas_log->append(NasRecord{ctx_.clock->now(), msg.supi, to_string(msg.kind),
                                   downlink ? "core-to-ue" : "ue-to-core", to_string(access)});
}

void Amf::checkpoint(const UeContext& ctx) {
    udsf_client::put(ctx_, id_, config_.udsf, id_, "ue/" + ctx.supi.to_string(),
                     to_bytes(canonical_json(ctx.to_json())));
}

UeContext* Amf::ensure_context(const std::string& supi) {
    auto it = contexts_.find(supi);
    if (it != contexts_.end()) return &it->second;
    auto blob = udsf_client::get(ctx_, id_, config_.udsf, id_, "ue/" + supi);
    if (!blob) return nullptr;
    UeContext recovered = UeContext::from_json(Json::parse(to_string(blob->value)));
    auto [ins, ok] = contexts_.emplace(supi, std::move(recovered));
    if (ins->second.rm == RmState::Registered) arm_periodic_timer(supi);
    ctx_.metrics->add("amf.contexts_recovered");
    return &ins->second;
}

std::optional<UeContext> Amf::context(const std::string& supi) {
    UeContext* c = ensure_context(supi);
    if (!c) return std::nullopt;
    return *c;
}

void Amf::publish_ue_event(const char* kind, const UeContext& ctx) {
    ctx_.bus->publish(Json{{"core_event", true},
                           {"kind", kind},
                           {"supi", ctx.supi.to_string()},
                           {"t", ctx_.clock->now()},
                           {"payload",
                            Json{{"access", to_string(ctx.access)},
                                 {"serving_node", ctx.serving_node}}}});
}

void Amf::set_cm_state(UeContext& ctx, CmState cm) {
    if (ctx.cm == cm) return;
    ctx.cm = cm;
    publish_ue_event(cm == CmState::Connected ? "UeReachable" : "UeUnreachable", ctx);
}

void Amf::arm_periodic_timer(const std::string& supi) {
    auto it = periodic_timers_.find(supi);
    if (it != periodic_timers_.end()) ctx_.clock->cancel(it->second);
    auto ctx_it = contexts_.find(supi);
    if (ctx_it == contexts_.end()) return;
    // implicit deregistration when the deadline lapses by more than one period
    SimTime fire_at = ctx_it->second.periodic_deadline + config_.periodic_update_period;
    periodic_timers_[supi] = ctx_.clock->schedule_at(fire_at, [this, supi] {
        periodic_timers_.erase(supi);
        implicit_deregistration(supi);
    });
}

void Amf::implicit_deregistration(const std::string& supi) {
    auto it = contexts_.find(supi);
    if (it == contexts_.end() || it->second.rm != RmState::Registered) return;
    if (ctx_.clock->now() < it->second.periodic_deadline + config_.periodic_update_period) return;
    UeContext& ctx = it->second;
    ctx.rm = RmState::Deregistered;
    set_cm_state(ctx, CmState::Idle);
    ctx.security.reset();
    ctx.allowed_nssai.clear();
    checkpoint(ctx);
    ctx_.metrics->add("amf.implicit_deregistrations");
    SbiRequest req;
    req.src = id_;
    req.target = config_.udm;
    req.method = SbiMethod::Delete;
    req.uri = "/nudm-uecm/v1/" + supi + "/registrations/" + id_;
    ctx_.bus->invoke(std::move(req));
}

SbiResponse Amf::nas_reply(const UeContext* ctx, NasKind kind, const std::string& supi,
                           Json payload, AccessType access) {
    NasMessage m;
    if (ctx && ctx->security && !nas_kind_is_unprotected(kind) && kind != NasKind::AuthChallenge) {
        // protected downlink; counter advance is a context mutation
        UeContext& mutable_ctx = const_cast<UeContext&>(*ctx);
        m = make_protected_nas(*mutable_ctx.security, true, kind, supi, std::move(payload));
        checkpoint(mutable_ctx);
    } else {
        m.kind = kind;
        m.supi = supi;
        m.payload = std::move(payload);
    }
    log_nas(m, true, access);
    return SbiResponse::ok(Json{{"nas", m.to_json()}});
}

SbiResponse Amf::reject(const std::string& supi, const std::string& cause, AccessType access,
                        UeContext* ctx) {
    ctx_.metrics->add("amf.registration_rejects");
    ctx_.metrics->set("amf.last_reject_cause_hash",
                      static_cast<int64_t>(std::hash<std::string>{}(cause) & 0x7fffffff));
    Json payload{{"cause", cause}};
    return nas_reply(ctx, NasKind::RegistrationReject, supi, std::move(payload), access);
}

SbiResponse Amf::handle_comm(const SbiRequest& req) {
    auto segs = split_path(req.uri);  // /namf-comm/v1/ue-contexts/{supi}[/...]
    if (segs.size() < 4 || segs[2] != "ue-contexts")
        return SbiResponse::fail(400, "bad-uri", req.uri);
    const std::string& supi = segs[3];

    if (segs.size() == 5 && segs[4] == "n1-messages" && req.method == SbiMethod::Post)
        return handle_n1(supi, req);

    if (segs.size() == 5 && segs[4] == "release" && req.method == SbiMethod::Post) {
        UeContext* ctx = ensure_context(supi);
        if (!ctx) return SbiResponse::fail(404, "no-context", supi);
        set_cm_state(*ctx, CmState::Idle);
        checkpoint(*ctx);
        return SbiResponse::ok(Json{{"cm", "Idle"}});
    }

    if (segs.size() == 5 && segs[4] == "paging-trigger" && req.method == SbiMethod::Post)
        return page(supi);

    if (segs.size() == 4 && req.method == SbiMethod::Delete) {
        // another AMF took over this UE; drop local state
        auto it = contexts_.find(supi);
        if (it != contexts_.end()) {
            contexts_.erase(it);
            auto t = periodic_timers_.find(supi);
            if (t != periodic_timers_.end()) {
                ctx_.clock->cancel(t->second);
                periodic_timers_.erase(t);
            }
        }
        return SbiResponse::ok(Json::object(), 204);
    }

    if (segs.size() == 4 && req.method == SbiMethod::Get) {
        UeContext* ctx = ensure_context(supi);
        if (!ctx) return SbiResponse::fail(404, "no-context", supi);
        return SbiResponse::ok(ctx->to_json());
    }

    return SbiResponse::fail(400, "bad-uri", req.uri);
}

SbiResponse Amf::handle_n1(const std::string& supi, const SbiRequest& req) {
    NasMessage msg;
    AccessType access = AccessType::ThreeGpp;
    std::string serving_node;
    try {
        msg = NasMessage::from_json(req.body.at("nas"));
        access = access_type_from(req.body.value("access", "3gpp")).value_or(AccessType::ThreeGpp);
        serving_node = req.body.value("serving_node", req.src);
    } catch (const std::exception& e) {
        return SbiResponse::fail(400, "bad-nas", e.what());
    }
    if (msg.supi != supi) return SbiResponse::fail(400, "supi-mismatch", supi);

    if (msg.kind == NasKind::RegistrationRequest) {
        log_nas(msg, false, access);
        return on_registration_request(supi, msg, access, serving_node);
    }
    if (msg.kind == NasKind::AuthResponse) {
        log_nas(msg, false, access);
        return on_auth_response(supi, msg);
    }

    // all remaining kinds require a context and verify integrity first
    UeContext* ctx = ensure_context(supi);
    if (!ctx || !ctx->security)
        return SbiResponse::fail(404, "no-context", supi);
    if (!verify_protected_nas(*ctx->security, false, msg)) {
        ctx_.metrics->add("amf.integrity_failures");
        return SbiResponse::fail(403, "integrity-failed", supi);
    }
    checkpoint(*ctx);  // counter advanced
    log_nas(msg, false, access);

    switch (msg.kind) {
        case NasKind::ServiceRequest: return on_service_request(*ctx, msg);
        case NasKind::PeriodicUpdate: return on_periodic_update(*ctx, msg);
        case NasKind::DeregistrationRequest: return on_deregistration(*ctx, msg);
        case NasKind::SessionTransport: return on_session_transport(*ctx, msg);
        default: return SbiResponse::fail(400, "bad-kind", to_string(msg.kind));
    }
}

SbiResponse Amf::on_registration_request(const std::string& supi, const NasMessage& msg,
                                         AccessType access, const std::string& serving_node) {
    PendingAuth pending;
    pending.access = access;
    pending.serving_node = serving_node;
    try {
        for (const auto& s : msg.payload.at("requested_nssai"))
            pending.requested_nssai.push_back(Snssai::parse(s.get<std::string>()));
    } catch (const std::exception&) {
        return reject(supi, "malformed-request", access);
    }

    SbiRequest challenge;
    challenge.src = id_;
    challenge.target = config_.ausf;
    challenge.method = SbiMethod::Post;
    challenge.uri = "/nausf-auth/v1/" + supi + "/challenge";
    auto out = ctx_.bus->invoke(std::move(challenge));
    if (!out.delivered()) return reject(supi, "no-ausf", access);
    if (out.response.status == 404) return reject(supi, "unknown-subscriber", access);
    if (!out.ok()) return reject(supi, "auth-failed", access);

    pending_auth_[supi] = std::move(pending);

    NasMessage auth;
    auth.kind = NasKind::AuthChallenge;
    auth.supi = supi;
    auth.payload = Json{{"rand_hex", out.response.body.at("rand_hex").get<std::string>()}};
    auth.mac = out.response.body.at("autn").get<std::string>();
    log_nas(auth, true, access);
    return SbiResponse::ok(Json{{"nas", auth.to_json()}});
}

SbiResponse Amf::on_auth_response(const std::string& supi, const NasMessage& msg) {
    auto pending_it = pending_auth_.find(supi);
    if (pending_it == pending_auth_.end())
        return reject(supi, "protocol-error", AccessType::ThreeGpp);
    PendingAuth pending = pending_it->second;
    pending_auth_.erase(pending_it);

    SbiRequest confirm;
    confirm.src = id_;
    confirm.target = config_.ausf;
    confirm.method = SbiMethod::Post;
    confirm.uri = "/nausf-auth/v1/" + supi + "/confirm";
    confirm.body = Json{{"res_hex", msg.payload.value("res_hex", "")}};
    auto out = ctx_.bus->invoke(std::move(confirm));
    if (!out.ok()) return reject(supi, "auth-failed", pending.access);
    Bytes session_key = from_hex(out.response.body.at("session_key_hex").get<std::string>());

    SbiRequest sdm;
    sdm.src = id_;
    sdm.target = config_.udm;
    sdm.method = SbiMethod::Get;
    sdm.uri = "/nudm-sdm/v1/" + supi;
    auto sub = ctx_.bus->invoke(std::move(sdm));
    if (!sub.ok()) return reject(supi, "unknown-subscriber", pending.access);
    std::vector<Snssai> subscribed;
    for (const auto& s : sub.response.body.at("allowed_snssais"))
        subscribed.push_back(Snssai::parse(s.get<std::string>()));

    AmPolicy am = policy_client::fetch_am_policy(ctx_, id_, config_.pcf, supi);
    if (am.forbidden) return reject(supi, "forbidden", pending.access);

    auto selection =
        policy_client::select_slices(ctx_, id_, config_.nssf, pending.requested_nssai, subscribed);
    if (!selection || selection->allowed.empty())
        return reject(supi, "no-allowed-slice", pending.access);

    SbiRequest uecm;
    uecm.src = id_;
    uecm.target = config_.udm;
    uecm.method = SbiMethod::Post;
    uecm.uri = "/nudm-uecm/v1/" + supi + "/registrations";
    uecm.body = Json{{"amf_id", id_}};
    auto served = ctx_.bus->invoke(std::move(uecm));
    if (served.ok() && served.response.body.contains("previous_amf")) {
        SbiRequest cleanup;
        cleanup.src = id_;
        cleanup.target = served.response.body.at("previous_amf").get<std::string>();
        cleanup.method = SbiMethod::Delete;
        cleanup.uri = "/namf-comm/v1/ue-contexts/" + supi;
        ctx_.bus->invoke(std::move(cleanup));
    }

    UeContext& ctx = contexts_[supi];
    bool node_changed = ctx.serving_node != pending.serving_node;
    ctx.supi = Supi::parse(supi);
    ctx.rm = RmState::Registered;
    ctx.access = pending.access;
    ctx.serving_node = pending.serving_node;
    ctx.allowed_nssai = selection->allowed;
    ctx.security = SecurityCtx{session_key, 0, 0};
    ctx.periodic_deadline = ctx_.clock->now() + config_.periodic_update_period;
    set_cm_state(ctx, CmState::Connected);
    if (node_changed) publish_ue_event("LocationChanged", ctx);
    arm_periodic_timer(supi);
    ctx_.metrics->add("amf.registrations");

    Json allowed = Json::array();
    for (const auto& s : ctx.allowed_nssai) allowed.push_back(s.to_string());
    return nas_reply(&ctx, NasKind::RegistrationAccept, supi,
                     Json{{"allowed_nssai", allowed},
                          {"periodic_update_period_us", config_.periodic_update_period},
                          {"rfsp_index", am.rfsp_index}},
                     pending.access);
}

SbiResponse Amf::on_service_request(UeContext& ctx, const NasMessage&) {
    if (ctx.rm != RmState::Registered)
        return reject(ctx.supi.to_string(), "not-registered", ctx.access, &ctx);
    // already Connected -> idempotent success
    set_cm_state(ctx, CmState::Connected);
    auto timer = paging_timers_.find(ctx.supi.to_string());
    if (timer != paging_timers_.end()) {
        ctx_.clock->cancel(timer->second);
        paging_timers_.erase(timer);
    }
    checkpoint(ctx);
    return SbiResponse::ok(Json{{"ack", true}, {"cm", "Connected"}});
}

SbiResponse Amf::on_periodic_update(UeContext& ctx, const NasMessage&) {
    if (ctx.rm != RmState::Registered)
        return reject(ctx.supi.to_string(), "not-registered", ctx.access, &ctx);
    if (ctx_.clock->now() > ctx.periodic_deadline + config_.periodic_update_period) {
        implicit_deregistration(ctx.supi.to_string());
        return reject(ctx.supi.to_string(), "implicitly-deregistered", ctx.access);
    }
    ctx.periodic_deadline = ctx_.clock->now() + config_.periodic_update_period;
    arm_periodic_timer(ctx.supi.to_string());
    checkpoint(ctx);
    return SbiResponse::ok(Json{{"ack", true}, {"deadline_us", ctx.periodic_deadline}});
}

SbiResponse Amf::on_deregistration(UeContext& ctx, const NasMessage&) {
    ctx.rm = RmState::Deregistered;
    set_cm_state(ctx, CmState::Idle);
    ctx.security.reset();
    ctx.allowed_nssai.clear();
    checkpoint(ctx);
    auto timer = periodic_timers_.find(ctx.supi.to_string());
    if (timer != periodic_timers_.end()) {
        ctx_.clock->cancel(timer->second);
        periodic_timers_.erase(timer);
    }
    SbiRequest req;
    req.src = id_;
    req.target = config_.udm;
    req.method = SbiMethod::Delete;
    req.uri = "/nudm-uecm/v1/" + ctx.supi.to_string() + "/registrations/" + id_;
    ctx_.bus->invoke(std::move(req));
    return SbiResponse::ok(Json{{"ack", true}});
}

SbiResponse Amf::on_session_transport(UeContext& ctx, const NasMessage& msg) {
    if (ctx.rm != RmState::Registered)
        return reject(ctx.supi.to_string(), "not-registered", ctx.access, &ctx);

    auto smfs = nrf_client::discover(ctx_, id_, NfType::SMF);
    if (smfs.empty()) return reject(ctx.supi.to_string(), "no-smf", ctx.access, &ctx);

    SbiRequest sm;
    sm.src = id_;
    sm.target = smfs.front().instance_id;
    sm.method = SbiMethod::Post;
    sm.uri = "/nsmf-pdusession/v1/sm-contexts";
    sm.body = Json{{"supi", ctx.supi.to_string()},
                   {"access", to_string(ctx.access)},
                   {"serving_node", ctx.serving_node},
                   {"payload", msg.payload}};  // forwarded unmodified
    auto out = ctx_.bus->invoke(std::move(sm));

    Json reply_payload;
    if (out.ok()) {
        reply_payload = out.response.body;
        // hand the access node its user-plane half of the session
        if (reply_payload.value("accepted", false)) {
            SbiRequest setup;
            setup.src = id_;
            setup.target = ctx.serving_node;
            setup.method = SbiMethod::Post;
            setup.uri = "/n2/v1/session-setup";
            setup.body = Json{{"supi", ctx.supi.to_string()},
                              {"session_id", reply_payload.at("session_id")},
                              {"ue_ip", reply_payload.at("ue_ip")},
                              {"upf_node", reply_payload.at("upf_node")},
                              {"ul_tunnel_id", reply_payload.at("ul_tunnel_id")},
                              {"dl_tunnel_id", reply_payload.at("dl_tunnel_id")}};
            ctx_.bus->invoke(std::move(setup));
        } else if (reply_payload.value("released", false)) {
            SbiRequest teardown;
            teardown.src = id_;
            teardown.target = ctx.serving_node;
            teardown.method = SbiMethod::Post;
            teardown.uri = "/n2/v1/session-release";
            teardown.body = Json{{"supi", ctx.supi.to_string()},
                                 {"session_id", reply_payload.at("session_id")}};
            ctx_.bus->invoke(std::move(teardown));
        }
    } else {
        reply_payload = Json{{"accepted", false},
                             {"cause", out.delivered() && out.response.problem
                                           ? out.response.problem->title
                                           : "smf-unreachable"}};
    }
    return nas_reply(&ctx, NasKind::SessionTransport, ctx.supi.to_string(),
                     std::move(reply_payload), ctx.access);
}

SbiResponse Amf::page(const std::string& supi) {
    UeContext* ctx = ensure_context(supi);
    if (!ctx || ctx->rm != RmState::Registered)
        return SbiResponse::fail(404, "not-registered", supi);
    if (ctx->cm == CmState::Connected)
        return SbiResponse::ok(Json{{"paging", "already-connected"}});
    if (paging_timers_.count(supi))
        return SbiResponse::ok(Json{{"paging", "in-progress"}});

    SbiRequest pagereq;
    pagereq.src = id_;
    pagereq.target = ctx->serving_node;
    pagereq.method = SbiMethod::Post;
    pagereq.uri = "/n2/v1/paging";
    pagereq.body = Json{{"supi", supi}};
    ctx_.bus->invoke(std::move(pagereq));
    ctx_.metrics->add("amf.paging_attempts");

    paging_timers_[supi] = ctx_.clock->schedule_after(config_.paging_timeout, [this, supi] {
        paging_timers_.erase(supi);
        auto it = contexts_.find(supi);
        if (it != contexts_.end() && it->second.cm == CmState::Idle) {
            ctx_.metrics->add("amf.paging_failures");
        }
    });
    return SbiResponse::ok(Json{{"paging", "started"}});
}

}  // namespace sbacore
