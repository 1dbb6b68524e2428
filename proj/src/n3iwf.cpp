/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/n3iwf.hpp"

#include "sbacore/auth_data.hpp"
#include "sbacore/crypto.hpp"
#include "sbacore/nrf.hpp"
#include "sbacore/uri.hpp"

namespace sbacore {

Bytes encode_nwu_frame(NwuStream stream, uint32_t counter, const Bytes& body) {
    Bytes out;
    out.reserve(5 + body.size());
    out.push_back(static_cast<uint8_t>(stream));
    put_u32_be(out, counter);
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

std::optional<NwuFrame> decode_nwu_frame(const Bytes& wire) {
    if (wire.size() < 5) return std::nullopt;
    if (wire[0] > 2) return std::nullopt;
    return NwuFrame{static_cast<NwuStream>(wire[0]), get_u32_be(wire.data() + 1),
                    Bytes(wire.begin() + 5, wire.end())};
}

namespace {
Bytes nwu_nonce(uint8_t direction, uint32_t counter) {
    Bytes nonce(12, 0);
    nonce[0] = direction;
    nonce[8] = uint8_t(counter >> 24);
    nonce[9] = uint8_t(counter >> 16);
    nonce[10] = uint8_t(counter >> 8);
    nonce[11] = uint8_t(counter);
    return nonce;
}
Bytes nwu_aad(NwuStream stream, uint32_t counter) {
    Bytes aad;
    aad.push_back(static_cast<uint8_t>(stream));
    put_u32_be(aad, counter);
    return aad;
}
}  // namespace

Bytes nwu_seal(const Bytes& channel_key, uint8_t direction, NwuStream stream, uint32_t counter,
               const Bytes& plaintext) {
    return crypto::aead_seal(channel_key, nwu_nonce(direction, counter), nwu_aad(stream, counter),
                             plaintext);
}

bool nwu_open(const Bytes& channel_key, uint8_t direction, NwuStream stream, uint32_t counter,
              const Bytes& sealed, Bytes& plaintext_out) {
    return crypto::aead_open(channel_key, nwu_nonce(direction, counter), nwu_aad(stream, counter),
                             sealed, plaintext_out);
}

// ---------------------------------------------------------------------------
// N3IWF
//
// Locking rule: mu_ is never held across a bus invoke, a fabric delivery or
// a peer callback; outbound Y2 frames queue under the lock and flush after.

N3iwf::N3iwf(RunContext ctx, NfInstanceId id, N3iwfConfig config, UserPlaneFabric* fabric)
    : ctx_(std::move(ctx)), id_(std::move(id)), config_(config), fabric_(fabric) {
    ctx_.bus->bind(id_, "/n2/v1", [this](const SbiRequest& r) { return handle_n2(r); });
    fabric_->attach(id_, [this](const std::string&, uint32_t tunnel, Bytes payload) {
        on_fabric_frame(tunnel, std::move(payload));
    });
}

N3iwf::~N3iwf() {
    fabric_->detach(id_);
    ctx_.bus->unbind_all(id_);
}

void N3iwf::connect_peer(const std::string& peer_id, PeerSender to_peer) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    peers_[peer_id] = std::move(to_peer);
}

void N3iwf::disconnect_peer(const std::string& peer_id) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    peers_.erase(peer_id);
    auto it = tunnels_.find(peer_id);
    if (it != tunnels_.end()) it->second.state = NwuState::Closed;
}

N3iwf::Tunnel* N3iwf::tunnel_for_peer(const std::string& peer_id) {
    auto it = tunnels_.find(peer_id);
    return it == tunnels_.end() ? nullptr : &it->second;
}

std::optional<NwuState> N3iwf::tunnel_state(const std::string& peer_id) const {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = tunnels_.find(peer_id);
    if (it == tunnels_.end()) return std::nullopt;
    return it->second.state;
}

void N3iwf::queue_control(Tunnel& tunnel, const Json& msg) {
    outbox_.emplace_back(tunnel.peer_id,
                         encode_nwu_frame(NwuStream::Control, 0, to_bytes(canonical_json(msg))));
}

void N3iwf::queue_sealed(Tunnel& tunnel, NwuStream stream, const Bytes& plaintext) {
    if (tunnel.state != NwuState::Established) return;
    uint32_t counter = tunnel.tx_counter++;
    outbox_.emplace_back(
        tunnel.peer_id,
        encode_nwu_frame(stream, counter,
                         nwu_seal(tunnel.channel_key, 1, stream, counter, plaintext)));
}

void N3iwf::flush_outbox() {
    for (;;) {
        std::vector<std::pair<std::string, Bytes>> batch;
        std::map<std::string, PeerSender> senders;
        {
            std::lock_guard<std::recursive_mutex> lock(mu_);
            if (outbox_.empty()) return;
            batch.swap(outbox_);
            senders = peers_;
        }
        for (auto& [peer, wire] : batch) {
            auto it = senders.find(peer);
            if (it != senders.end()) it->second(wire);
        }
    }
}

void N3iwf::on_y2_frame(const std::string& peer_id, const Bytes& wire) {
    auto frame = decode_nwu_frame(wire);
    if (!frame) return;

    if (frame->stream == NwuStream::Control) {
        Json msg = Json::parse(to_string(frame->body), nullptr, false);
        if (msg.is_object()) handle_control(peer_id, msg);
        flush_outbox();
        return;
    }

    Bytes plaintext;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        Tunnel* tunnel = tunnel_for_peer(peer_id);
        if (!tunnel || tunnel->state != NwuState::Established) return;
        if (frame->counter < tunnel->rx_counter) {
            ++integrity_drops_;  // replayed counter
            return;
        }
        if (!nwu_open(tunnel->channel_key, 0, frame->stream, frame->counter, frame->body,
                      plaintext)) {
            ++integrity_drops_;
            return;
        }
        tunnel->rx_counter = frame->counter + 1;
    }
    if (frame->stream == NwuStream::Signaling)
        handle_signaling(peer_id, plaintext);
    else
        handle_userplane(peer_id, plaintext);
    flush_outbox();
}

void N3iwf::handle_control(const std::string& peer_id, const Json& msg) {
    std::string type = msg.value("type", "");

    if (type == "nwu-auth-init") {
        std::string supi = msg.value("supi", "");
        {
            std::lock_guard<std::recursive_mutex> lock(mu_);
            Tunnel& tunnel = tunnels_[peer_id];
            tunnel.peer_id = peer_id;
            tunnel.pending_supi = supi;
            tunnel.state = NwuState::EapInProgress;
        }
        auto ausfs = nrf_client::discover(ctx_, id_, NfType::AUSF);
        SbiOutcome out;
        if (!ausfs.empty()) {
            SbiRequest req;
            req.src = id_;
            req.target = ausfs.front().instance_id;
            req.method = SbiMethod::Post;
            req.uri = "/nausf-auth/v1/" + supi + "/challenge";
            out = ctx_.bus->invoke(std::move(req));
        }
        std::lock_guard<std::recursive_mutex> lock(mu_);
        Tunnel& tunnel = tunnels_[peer_id];
        if (ausfs.empty()) {
            tunnel.state = NwuState::Closed;
            queue_control(tunnel, Json{{"type", "nwu-closed"}, {"cause", "no-ausf"}});
        } else if (!out.ok()) {
            tunnel.state = NwuState::Closed;
            queue_control(tunnel, Json{{"type", "nwu-closed"}, {"cause", "auth-failed"}});
        } else {
            queue_control(tunnel, Json{{"type", "nwu-auth-challenge"},
                                       {"rand_hex", out.response.body.at("rand_hex")},
                                       {"autn", out.response.body.at("autn")}});
        }
        return;
    }

    if (type == "nwu-auth-response") {
        std::string supi;
        {
            std::lock_guard<std::recursive_mutex> lock(mu_);
            Tunnel& tunnel = tunnels_[peer_id];
            tunnel.peer_id = peer_id;
            if (tunnel.pending_supi.empty()) {
                queue_control(tunnel, Json{{"type", "nwu-error"}, {"cause", "protocol-error"}});
                return;
            }
            supi = tunnel.pending_supi;
        }
        auto ausfs = nrf_client::discover(ctx_, id_, NfType::AUSF);
        SbiOutcome out;
        if (!ausfs.empty()) {
            SbiRequest req;
            req.src = id_;
            req.target = ausfs.front().instance_id;
            req.method = SbiMethod::Post;
            req.uri = "/nausf-auth/v1/" + supi + "/confirm";
            req.body = Json{{"res_hex", msg.value("res_hex", "")}};
            out = ctx_.bus->invoke(std::move(req));
        }
        // AMF selection: first discovery result for the default slice
        NfInstanceId amf;
        if (out.ok()) {
            auto amfs = nrf_client::discover(ctx_, id_, NfType::AMF, {}, config_.default_snssai);
            if (amfs.empty()) amfs = nrf_client::discover(ctx_, id_, NfType::AMF);
            if (!amfs.empty()) amf = amfs.front().instance_id;
        }
        std::lock_guard<std::recursive_mutex> lock(mu_);
        Tunnel& tunnel = tunnels_[peer_id];
        if (ausfs.empty() || !out.ok()) {
            tunnel.state = NwuState::Closed;
            tunnel.pending_supi.clear();
            queue_control(tunnel, Json{{"type", "nwu-closed"},
                                       {"cause", ausfs.empty() ? "no-ausf" : "auth-failed"}});
            return;
        }
        tunnel.channel_key = from_hex(out.response.body.at("session_key_hex").get<std::string>());
        tunnel.supi = tunnel.pending_supi;
        tunnel.pending_supi.clear();
        tunnel.tunnel_id = next_tunnel_id_++;
        tunnel.state = NwuState::Established;
        tunnel.rx_counter = 0;
        tunnel.tx_counter = 0;
        tunnel.assigned_amf = amf;
        peer_by_supi_[tunnel.supi] = peer_id;
        queue_control(tunnel, Json{{"type", "nwu-established"}, {"tunnel_id", tunnel.tunnel_id}});
        return;
    }

    // anything else (including handshake replays) is a protocol error
    std::lock_guard<std::recursive_mutex> lock(mu_);
    Tunnel& tunnel = tunnels_[peer_id];
    tunnel.peer_id = peer_id;
    queue_control(tunnel, Json{{"type", "nwu-error"}, {"cause", "protocol-error"}});
}

void N3iwf::relay_nas_to_amf(const std::string& peer_id, const NasMessage& nas, int attempt) {
    NfInstanceId amf;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        Tunnel* tunnel = tunnel_for_peer(peer_id);
        if (!tunnel || tunnel->state != NwuState::Established) return;
        amf = tunnel->assigned_amf;
    }
    if (amf.empty()) {
        auto amfs = nrf_client::discover(ctx_, id_, NfType::AMF, {}, config_.default_snssai);
        if (amfs.empty()) amfs = nrf_client::discover(ctx_, id_, NfType::AMF);
        if (!amfs.empty()) amf = amfs.front().instance_id;
    }
    SbiOutcome out;
    if (!amf.empty()) {
        SbiRequest req;
        req.src = id_;
        req.target = amf;
        req.method = SbiMethod::Post;
        req.uri = "/namf-comm/v1/ue-contexts/" + nas.supi + "/n1-messages";
        req.body = Json{{"nas", nas.to_json()}, {"access", "non-3gpp"}, {"serving_node", id_}};
        out = ctx_.bus->invoke(std::move(req));
    }

    std::lock_guard<std::recursive_mutex> lock(mu_);
    Tunnel* tunnel = tunnel_for_peer(peer_id);
    if (!tunnel || tunnel->state != NwuState::Established) return;
    if (amf.empty() || !out.delivered()) {
        tunnel->assigned_amf.clear();  // force re-discovery on retry
        if (attempt + 1 < config_.relay_retries) {
            SimDuration delay = config_.relay_backoff << attempt;  // exponential backoff
            ctx_.clock->schedule_after(delay, [this, peer_id, nas, attempt] {
                relay_nas_to_amf(peer_id, nas, attempt + 1);
                flush_outbox();
            });
        } else {
            queue_sealed(*tunnel, NwuStream::Signaling,
                         to_bytes(canonical_json(Json{{"type", "n1-error"}, {"cause", "no-amf"}})));
        }
        return;
    }
    tunnel->assigned_amf = amf;
    if (out.response.body.contains("nas")) {
        queue_sealed(*tunnel, NwuStream::Signaling,
                     to_bytes(canonical_json(
                         Json{{"type", "n1"}, {"nas", out.response.body.at("nas")}})));
    } else {
        queue_sealed(*tunnel, NwuStream::Signaling,
                     to_bytes(canonical_json(Json{{"type", "n1-ack"},
                                                  {"status", out.response.status},
                                                  {"body", out.response.body}})));
    }
}

void N3iwf::handle_signaling(const std::string& peer_id, const Bytes& plaintext) {
    Json doc = Json::parse(to_string(plaintext), nullptr, false);
    if (!doc.is_object()) return;
    if (doc.value("type", "") != "n1") return;
    NasMessage nas;
    try {
        nas = NasMessage::from_json(doc.at("nas"));
    } catch (const std::exception&) {
        return;
    }
    relay_nas_to_amf(peer_id, nas, 0);
}

void N3iwf::handle_userplane(const std::string& peer_id, const Bytes& plaintext) {
    std::string upf_node;
    uint32_t ul_teid = 0;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        Tunnel* tunnel = tunnel_for_peer(peer_id);
        if (!tunnel) return;
        // uplink bridging requires an Active PDU session
        if (tunnel->sessions.empty()) {
            ctx_.metrics->add("n3iwf.dropped_no_session");
            return;
        }
        const SessionBinding& binding = tunnel->sessions.begin()->second;
        upf_node = binding.upf_node;
        ul_teid = binding.ul_teid;
    }
    fabric_->deliver(id_, upf_node, ul_teid, plaintext);
}

void N3iwf::on_fabric_frame(uint32_t dl_teid, Bytes payload) {
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        bool matched = false;
        for (auto& [peer, tunnel] : tunnels_) {
            if (!tunnel.by_dl_teid.count(dl_teid)) continue;
            queue_sealed(tunnel, NwuStream::UserPlane, payload);
            matched = true;
            break;
        }
        if (!matched) ctx_.metrics->add("n3iwf.dropped_unknown_teid");
    }
    flush_outbox();
}

SbiResponse N3iwf::handle_n2(const SbiRequest& req) {
    auto segs = split_path(req.uri);
    if (segs.size() < 3 || req.method != SbiMethod::Post)
        return SbiResponse::fail(400, "bad-uri", req.uri);

    SbiResponse response = SbiResponse::fail(400, "bad-uri", req.uri);
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        std::string supi = req.body.value("supi", "");
        auto peer_it = peer_by_supi_.find(supi);
        if (peer_it == peer_by_supi_.end()) return SbiResponse::fail(404, "no-tunnel", supi);
        Tunnel& tunnel = tunnels_[peer_it->second];

        if (segs[2] == "session-setup") {
            SessionBinding binding;
            binding.session_id = req.body.at("session_id").get<int>();
            binding.ul_teid = req.body.at("ul_tunnel_id").get<uint32_t>();
            binding.dl_teid = req.body.at("dl_tunnel_id").get<uint32_t>();
            binding.upf_node = req.body.at("upf_node").get<std::string>();
            binding.ue_ip = req.body.value("ue_ip", "");
            tunnel.by_dl_teid[binding.dl_teid] = binding.session_id;
            tunnel.sessions[binding.session_id] = binding;
            response = SbiResponse::ok(Json{{"bound", true}}, 201);
        } else if (segs[2] == "session-release") {
            int session_id = req.body.at("session_id").get<int>();
            auto s = tunnel.sessions.find(session_id);
            if (s != tunnel.sessions.end()) {
                tunnel.by_dl_teid.erase(s->second.dl_teid);
                tunnel.sessions.erase(s);
            }
            response = SbiResponse::ok(Json{{"released", true}});
        } else if (segs[2] == "paging") {
            queue_sealed(tunnel, NwuStream::Signaling,
                         to_bytes(canonical_json(Json{{"type", "paging"}})));
            response = SbiResponse::ok(Json{{"paged", true}});
        }
    }
    flush_outbox();
    return response;
}

// ---------------------------------------------------------------------------
// Non-3GPP peer (device or gateway host)

NonTgppPeer::NonTgppPeer(RunContext ctx, Config config, Y2Sender y2_send)
    : ctx_(std::move(ctx)), config_(std::move(config)), y2_send_(std::move(y2_send)),
      nas_(config_.supi, config_.long_term_key) {}

NonTgppPeer::~NonTgppPeer() = default;

void NonTgppPeer::attach() {
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        phase_ = Phase::NwuAuth;
        last_error_.clear();
        queue_control(Json{{"type", "nwu-auth-init"},
                           {"peer_id", config_.peer_id},
                           {"supi", config_.supi.to_string()}});
    }
    flush_outbox();
}

void NonTgppPeer::queue_control(const Json& msg) {
    outbox_.push_back(encode_nwu_frame(NwuStream::Control, 0, to_bytes(canonical_json(msg))));
}

void NonTgppPeer::queue_nas(const NasMessage& nas) {
    Json doc{{"type", "n1"}, {"nas", nas.to_json()}};
    uint32_t counter = tx_counter_++;
    outbox_.push_back(
        encode_nwu_frame(NwuStream::Signaling, counter,
                         nwu_seal(channel_key_, 0, NwuStream::Signaling, counter,
                                  to_bytes(canonical_json(doc)))));
}

void NonTgppPeer::flush_outbox() {
    for (;;) {
        std::vector<Bytes> batch;
        {
            std::lock_guard<std::recursive_mutex> lock(mu_);
            if (outbox_.empty()) return;
            batch.swap(outbox_);
        }
        for (auto& wire : batch) y2_send_(wire);
    }
}

bool NonTgppPeer::send_doc(const Json& doc) {
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        if (phase_ != Phase::Ready) return false;
        uint32_t counter = tx_counter_++;
        outbox_.push_back(
            encode_nwu_frame(NwuStream::UserPlane, counter,
                             nwu_seal(channel_key_, 0, NwuStream::UserPlane, counter,
                                      to_bytes(canonical_json(doc)))));
    }
    flush_outbox();
    return true;
}

void NonTgppPeer::fail(const std::string& reason) {
    phase_ = Phase::Failed;
    last_error_ = reason;
}

void NonTgppPeer::on_y2_frame(const Bytes& wire) {
    auto frame = decode_nwu_frame(wire);
    if (!frame) return;

    std::function<void()> ready_cb;
    Json up_doc;
    bool have_up_doc = false;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        if (frame->stream == NwuStream::Control) {
            Json msg = Json::parse(to_string(frame->body), nullptr, false);
            if (msg.is_object()) handle_control(msg);
        } else if (!channel_key_.empty()) {
            if (frame->counter < rx_counter_) {
                ++integrity_drops_;
            } else {
                Bytes plaintext;
                if (!nwu_open(channel_key_, 1, frame->stream, frame->counter, frame->body,
                              plaintext)) {
                    ++integrity_drops_;
                } else {
                    rx_counter_ = frame->counter + 1;
                    if (frame->stream == NwuStream::Signaling) {
                        bool was_ready = phase_ == Phase::Ready;
                        handle_signaling(plaintext);
                        if (!was_ready && phase_ == Phase::Ready && on_ready) ready_cb = on_ready;
                    } else {
                        up_doc = Json::parse(to_string(plaintext), nullptr, false);
                        have_up_doc = up_doc.is_object();
                    }
                }
            }
        }
    }
    flush_outbox();
    if (ready_cb) ready_cb();
    if (have_up_doc && on_doc) on_doc(up_doc);
}

void NonTgppPeer::handle_control(const Json& msg) {
    std::string type = msg.value("type", "");
    if (type == "nwu-auth-challenge" && phase_ == Phase::NwuAuth) {
        last_rand_ = from_hex(msg.at("rand_hex").get<std::string>());
        // authenticate the network before answering
        if (msg.value("autn", "") != aka::network_token(config_.long_term_key, last_rand_)) {
            fail("network-token-mismatch");
            return;
        }
        queue_control(Json{{"type", "nwu-auth-response"},
                           {"supi", config_.supi.to_string()},
                           {"res_hex",
                            to_hex(aka::expected_response(config_.long_term_key, last_rand_))}});
        return;
    }
    if (type == "nwu-established" && phase_ == Phase::NwuAuth) {
        channel_key_ = aka::session_key(config_.long_term_key, last_rand_);
        tx_counter_ = 0;
        rx_counter_ = 0;
        phase_ = Phase::Registering;
        queue_nas(nas_.make_registration_request(config_.requested_nssai));
        return;
    }
    if (type == "nwu-closed") fail(msg.value("cause", "closed"));
}

void NonTgppPeer::handle_signaling(const Bytes& plaintext) {
    Json doc = Json::parse(to_string(plaintext), nullptr, false);
    if (!doc.is_object()) return;
    std::string type = doc.value("type", "");

    if (type == "paging") {
        if (nas_.registered()) queue_nas(nas_.make_service_request());
        return;
    }
    if (type == "n1-error") {
        fail(doc.value("cause", "n1-error"));
        return;
    }
    if (type != "n1") return;
    NasMessage nas;
    try {
        nas = NasMessage::from_json(doc.at("nas"));
    } catch (const std::exception&) {
        return;
    }

    switch (nas.kind) {
        case NasKind::AuthChallenge: {
            auto response = nas_.on_auth_challenge(nas);
            if (!response) {
                fail("auth-challenge-rejected");
                return;
            }
            phase_ = Phase::AwaitAccept;
            queue_nas(*response);
            return;
        }
        case NasKind::RegistrationAccept:
        case NasKind::RegistrationReject: {
            if (!nas_.on_registration_outcome(nas)) {
                fail(nas_.last_reject_cause().empty() ? "registration-failed"
                                                      : nas_.last_reject_cause());
                return;
            }
            phase_ = Phase::SessionSetup;
            queue_nas(nas_.make_session_transport(Json{{"request", "establish"},
                                                       {"dnn", config_.dnn.to_string()},
                                                       {"snssai", config_.snssai.to_string()}}));
            return;
        }
        case NasKind::SessionTransport: {
            if (!nas_.verify_downlink(nas)) {
                ++integrity_drops_;
                return;
            }
            if (phase_ == Phase::SessionSetup && nas.payload.value("accepted", false)) {
                session_id_ = nas.payload.at("session_id").get<int>();
                ue_ip_ = nas.payload.at("ue_ip").get<std::string>();
                phase_ = Phase::Ready;
            } else if (phase_ == Phase::SessionSetup) {
                fail(nas.payload.value("cause", "session-rejected"));
            }
            return;
        }
        default:
            return;
    }
}

}  // namespace sbacore
