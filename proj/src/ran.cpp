/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/ran.hpp"

#include <cmath>

#include "sbacore/uri.hpp"

namespace sbacore {

double distance(const Point& a, const Point& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

EmGnb::EmGnb(RunContext ctx, std::string node_id, NfInstanceId amf, std::vector<CellConfig> cells,
             UserPlaneFabric* fabric)
    : ctx_(std::move(ctx)), node_id_(std::move(node_id)), amf_(std::move(amf)),
      cells_(std::move(cells)), fabric_(fabric) {
    ctx_.bus->bind(node_id_, "/n2/v1", [this](const SbiRequest& r) { return handle_n2(r); });
    fabric_->attach(node_id_, [this](const std::string&, uint32_t tunnel, Bytes payload) {
        on_fabric_frame(tunnel, std::move(payload));
    });
}

EmGnb::~EmGnb() {
    fabric_->detach(node_id_);
    ctx_.bus->unbind_all(node_id_);
}

std::optional<std::string> EmGnb::covering_cell(const Point& p) const {
    for (const auto& cell : cells_) {
        if (distance(cell.center, p) <= cell.radius_m) return cell.cell_id;
    }
    return std::nullopt;
}

void EmGnb::register_ue(EmUe* ue) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    ues_[ue->supi().to_string()] = ue;
}

void EmGnb::unregister_ue(const std::string& supi) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    ues_.erase(supi);
}

SbiResponse EmGnb::forward_nas(const NasMessage& nas) {
    SbiRequest req;
    req.src = node_id_;
    req.target = amf_;
    req.method = SbiMethod::Post;
    req.uri = "/namf-comm/v1/ue-contexts/" + nas.supi + "/n1-messages";
    req.body = Json{{"nas", nas.to_json()}, {"access", "3gpp"}, {"serving_node", node_id_}};
    auto out = ctx_.bus->invoke(std::move(req));
    return out.response;
}

void EmGnb::notify_an_release(const std::string& supi) {
    SbiRequest req;
    req.src = node_id_;
    req.target = amf_;
    req.method = SbiMethod::Post;
    req.uri = "/namf-comm/v1/ue-contexts/" + supi + "/release";
    ctx_.bus->invoke(std::move(req));
}

bool EmGnb::uplink_user(uint32_t ul_teid, const std::string& upf_node, const Bytes& payload) {
    return fabric_->deliver(node_id_, upf_node, ul_teid, payload);
}

void EmGnb::bind_downlink(uint32_t dl_teid, EmUe* ue) { by_dl_teid_[dl_teid] = ue; }

void EmGnb::unbind_downlink(uint32_t dl_teid) { by_dl_teid_.erase(dl_teid); }

void EmGnb::on_fabric_frame(uint32_t dl_teid, Bytes payload) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = by_dl_teid_.find(dl_teid);
    if (it == by_dl_teid_.end()) {
        ctx_.metrics->add("gnb.dropped_unknown_teid");
        return;
    }
    it->second->on_downlink(payload);
}

SbiResponse EmGnb::handle_n2(const SbiRequest& req) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto segs = split_path(req.uri);
    if (segs.size() < 3 || req.method != SbiMethod::Post)
        return SbiResponse::fail(400, "bad-uri", req.uri);

    if (segs[2] == "paging") {
        auto it = ues_.find(req.body.value("supi", ""));
        if (it != ues_.end()) {
            EmUe* ue = it->second;
            // deliver the page only when the UE is inside one of our cells
            if (covering_cell(ue->position())) {
                ctx_.clock->schedule_after(0, [ue] { ue->on_paging(); });
            }
        }
        return SbiResponse::ok(Json{{"paged", true}});
    }
    if (segs[2] == "session-setup") {
        auto it = ues_.find(req.body.value("supi", ""));
        if (it == ues_.end()) return SbiResponse::fail(404, "unknown-ue", req.uri);
        UeSessionInfo info;
        info.session_id = req.body.at("session_id").get<int>();
        info.ue_ip = req.body.at("ue_ip").get<std::string>();
        info.ul_teid = req.body.at("ul_tunnel_id").get<uint32_t>();
        info.dl_teid = req.body.at("dl_tunnel_id").get<uint32_t>();
        info.upf_node = req.body.at("upf_node").get<std::string>();
        bind_downlink(info.dl_teid, it->second);
        it->second->on_session_setup(info);
        return SbiResponse::ok(Json{{"bound", true}}, 201);
    }
    if (segs[2] == "session-release") {
        auto it = ues_.find(req.body.value("supi", ""));
        if (it == ues_.end()) return SbiResponse::fail(404, "unknown-ue", req.uri);
        it->second->on_session_release(req.body.at("session_id").get<int>());
        return SbiResponse::ok(Json{{"released", true}});
    }
    return SbiResponse::fail(400, "bad-uri", req.uri);
}

// ---------------------------------------------------------------------------
// UE

// UE
//
// mu_ guards UE state; it is released around every gNB/bus round trip so
// that N2 callbacks (session setup, paging) can take it from other threads.

EmUe::EmUe(RunContext ctx, Supi supi, Bytes key, Point position,
           std::vector<Snssai> requested_nssai)
    : ctx_(std::move(ctx)), supi_(supi), position_(position),
      requested_nssai_(std::move(requested_nssai)), nas_(supi, std::move(key)) {}

AttachOutcome EmUe::attach(EmGnb* gnb) {
    NasMessage request;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        auto cell = gnb->covering_cell(position_);
        if (!cell) {
            last_error_ = "no-cell";
            return AttachOutcome::NoCell;
        }
        gnb_ = gnb;
        request = nas_.make_registration_request(requested_nssai_);
    }
    gnb->register_ue(this);

    auto challenge = gnb->forward_nas(request);
    if (!challenge.body.contains("nas")) {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        last_error_ = "no-response";
        return AttachOutcome::Rejected;
    }
    NasMessage msg = NasMessage::from_json(challenge.body.at("nas"));
    std::optional<NasMessage> response;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        if (msg.kind == NasKind::RegistrationReject) {
            nas_.on_registration_outcome(msg);
            last_error_ = nas_.last_reject_cause();
            return AttachOutcome::Rejected;
        }
        response = nas_.on_auth_challenge(msg);
        if (!response) {
            last_error_ = "network-token-mismatch";
            return AttachOutcome::Rejected;
        }
    }
    auto outcome = gnb->forward_nas(*response);
    std::lock_guard<std::recursive_mutex> lock(mu_);
    if (!outcome.body.contains("nas")) {
        last_error_ = "no-response";
        return AttachOutcome::Rejected;
    }
    if (!nas_.on_registration_outcome(NasMessage::from_json(outcome.body.at("nas")))) {
        last_error_ = nas_.last_reject_cause();
        return AttachOutcome::Rejected;
    }
    attached_cell_ = gnb->covering_cell(position_);
    connected_ = true;
    last_error_.clear();
    return AttachOutcome::Registered;
}

bool EmUe::deregister() {
    NasMessage request;
    EmGnb* gnb = nullptr;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        if (!nas_.registered() || !gnb_) return false;
        gnb = gnb_;
        request = nas_.make_deregistration_request();
    }
    gnb->forward_nas(request);
    std::lock_guard<std::recursive_mutex> lock(mu_);
    nas_.mark_deregistered();
    connected_ = false;
    for (auto& [id, s] : sessions_) gnb->unbind_downlink(s.dl_teid);
    sessions_.clear();
    return true;
}

std::optional<int> EmUe::establish_session(const std::string& dnn, const Snssai& snssai) {
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        if (!nas_.registered() || !gnb_) {
            last_error_ = "not-registered";
            return std::nullopt;
        }
    }
    if (!connected() && !send_service_request()) return std::nullopt;

    NasMessage request;
    EmGnb* gnb = nullptr;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        gnb = gnb_;
        request = nas_.make_session_transport(
            Json{{"request", "establish"}, {"dnn", dnn}, {"snssai", snssai.to_string()}});
    }
    auto reply = gnb->forward_nas(request);
    std::lock_guard<std::recursive_mutex> lock(mu_);
    if (!reply.body.contains("nas")) {
        last_error_ = "no-response";
        return std::nullopt;
    }
    NasMessage msg = NasMessage::from_json(reply.body.at("nas"));
    if (msg.kind != NasKind::SessionTransport || !nas_.verify_downlink(msg)) {
        last_error_ = "bad-reply";
        return std::nullopt;
    }
    if (!msg.payload.value("accepted", false)) {
        last_error_ = msg.payload.value("cause", "session-rejected");
        return std::nullopt;
    }
    // the gNB already holds the downlink binding via N2 session-setup
    last_error_.clear();
    return msg.payload.at("session_id").get<int>();
}

bool EmUe::release_session(int session_id) {
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        if (!nas_.registered() || !gnb_) return false;
    }
    if (!connected() && !send_service_request()) return false;
    NasMessage request;
    EmGnb* gnb = nullptr;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        gnb = gnb_;
        request = nas_.make_session_transport(
            Json{{"request", "release"}, {"session_id", session_id}});
    }
    auto reply = gnb->forward_nas(request);
    std::lock_guard<std::recursive_mutex> lock(mu_);
    if (!reply.body.contains("nas")) return false;
    NasMessage msg = NasMessage::from_json(reply.body.at("nas"));
    if (!nas_.verify_downlink(msg)) return false;
    bool ok = msg.payload.value("released", false);
    if (ok) sessions_.erase(session_id);
    return ok;
}

bool EmUe::send_service_request() {
    NasMessage request;
    EmGnb* gnb = nullptr;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        if (!nas_.registered() || !gnb_) return false;
        gnb = gnb_;
        request = nas_.make_service_request();
    }
    auto reply = gnb->forward_nas(request);
    std::lock_guard<std::recursive_mutex> lock(mu_);
    if (reply.status != 200) {
        last_error_ = reply.problem ? reply.problem->title : "service-request-failed";
        return false;
    }
    connected_ = true;
    return true;
}

bool EmUe::send_periodic_update() {
    NasMessage request;
    EmGnb* gnb = nullptr;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        if (!nas_.registered() || !gnb_) return false;
        gnb = gnb_;
        request = nas_.make_periodic_update();
    }
    return gnb->forward_nas(request).status == 200;
}

bool EmUe::send(int session_id, const Bytes& payload) {
    uint32_t ul_teid = 0;
    std::string upf_node;
    EmGnb* gnb = nullptr;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        auto it = sessions_.find(session_id);
        if (it == sessions_.end()) {
            last_error_ = "no-session";
            return false;
        }
        if (!attached_cell_) {
            last_error_ = "out-of-coverage";
            return false;
        }
        gnb = gnb_;
        ul_teid = it->second.ul_teid;
        upf_node = it->second.upf_node;
    }
    if (!connected() && !send_service_request()) return false;
    return gnb->uplink_user(ul_teid, upf_node, payload);
}

void EmUe::go_idle() {
    EmGnb* gnb = nullptr;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        if (!gnb_ || !nas_.registered()) return;
        connected_ = false;
        gnb = gnb_;
    }
    gnb->notify_an_release(supi_.to_string());
}

void EmUe::move(const Point& to) {
    bool lost_coverage = false;
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        position_ = to;
        if (!gnb_) return;
        auto cell = gnb_->covering_cell(position_);
        if (cell) {
            // idle reselection within the same gNB keeps the registration
            attached_cell_ = cell;
            return;
        }
        if (attached_cell_) {
            attached_cell_.reset();
            lost_coverage = true;
        }
    }
    if (lost_coverage) go_idle();  // out of coverage: unreachable until re-entry
}

void EmUe::on_paging() {
    {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        if (!attached_cell_) return;  // cannot hear the page
    }
    send_service_request();
}

void EmUe::on_downlink(const Bytes& payload) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    received_.push_back(payload);
}

void EmUe::on_session_setup(const UeSessionInfo& info) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    sessions_[info.session_id] = info;
}

void EmUe::on_session_release(int session_id) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = sessions_.find(session_id);
    if (it != sessions_.end()) {
        gnb_->unbind_downlink(it->second.dl_teid);
        sessions_.erase(it);
    }
}

}  // namespace sbacore
