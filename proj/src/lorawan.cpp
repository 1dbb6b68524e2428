/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/lorawan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sbacore/crypto.hpp"

namespace sbacore::lorawan {

bool radio_params_valid(const RadioParams& p) {
    bool sf_ok = p.sf >= 7 && p.sf <= 10;
    bool bw_ok = p.bw_hz == 125000 || p.bw_hz == 250000 || p.bw_hz == 500000;
    bool cr_ok = p.cr_num == 4 && p.cr_den >= 5 && p.cr_den <= 8;
    return sf_ok && bw_ok && cr_ok;
}

double lora_bitrate(const RadioParams& p) {
    double chips = std::pow(2.0, p.sf);
    return p.sf * (p.bw_hz / chips) * (double(p.cr_num) / double(p.cr_den));
}

double lora_symbol_time(const RadioParams& p) {
    return std::pow(2.0, p.sf) / double(p.bw_hz);
}

std::optional<DeviceClass> device_class_from(const std::string& s) {
    if (s == "A" || s == "a") return DeviceClass::A;
    if (s == "B" || s == "b") return DeviceClass::B;
    if (s == "C" || s == "c") return DeviceClass::C;
    return std::nullopt;
}

const char* to_string(DeviceClass c) {
    switch (c) {
        case DeviceClass::A: return "A";
        case DeviceClass::B: return "B";
        case DeviceClass::C: return "C";
    }
    return "?";
}

std::vector<Window> schedule_class_windows(DeviceClass cls, SimTime uplink_time,
                                           const ClassWindowConfig& cfg) {
    std::vector<Window> windows;
    if (cls == DeviceClass::C) {
        windows.push_back(Window{uplink_time, std::numeric_limits<SimTime>::max()});
        return windows;
    }
    windows.push_back(Window{uplink_time + cfg.rx1_delay, uplink_time + cfg.rx1_delay + cfg.rx_length});
    windows.push_back(Window{uplink_time + cfg.rx2_delay, uplink_time + cfg.rx2_delay + cfg.rx_length});
    if (cls == DeviceClass::B) {
        // beacon-aligned ping slots after the uplink
        SimTime first = ((uplink_time / cfg.beacon_period) + 1) * cfg.beacon_period;
        for (SimTime t = first; t <= uplink_time + cfg.ping_horizon; t += cfg.beacon_period)
            windows.push_back(Window{t, t + cfg.rx_length});
    }
    return windows;
}

bool within_any_window(const std::vector<Window>& windows, SimTime t) {
    for (const auto& w : windows)
        if (t >= w.start && t <= w.end) return true;
    return false;
}

std::optional<RadioParams> adr_adjust(const RadioParams& current,
                                      const std::vector<double>& recent_best_rssi,
                                      const AdrConfig& cfg) {
    if (recent_best_rssi.size() < cfg.min_history) return std::nullopt;
    double best = *std::max_element(recent_best_rssi.begin(), recent_best_rssi.end());
    auto floor_it = cfg.rssi_floor.find(current.sf);
    double floor = floor_it != cfg.rssi_floor.end() ? floor_it->second : -130.0;
    double margin = best - floor;
    RadioParams adjusted = current;
    if (margin > cfg.margin_threshold && current.sf > 7) {
        adjusted.sf -= 1;
        return adjusted;
    }
    if (margin < cfg.margin_threshold && current.sf < 10) {
        adjusted.sf += 1;
        return adjusted;
    }
    return std::nullopt;
}

DeviceIdentity DeviceIdentity::from_json(const Json& j) {
    DeviceIdentity d;
    d.dev_eui = from_hex(j.at("dev_eui_hex").get<std::string>());
    d.app_eui = from_hex(j.at("app_eui_hex").get<std::string>());
    d.app_key = from_hex(j.at("app_key_hex").get<std::string>());
    if (d.dev_eui.size() != 8 || d.app_eui.size() != 8 || d.app_key.size() != 16)
        throw std::invalid_argument("DeviceIdentity: EUIs must be 8 bytes, key 16");
    d.activation = j.value("activation", "OTAA") == "ABP" ? Activation::ABP : Activation::OTAA;
    auto cls = device_class_from(j.value("class", "A"));
    if (!cls) throw std::invalid_argument("DeviceIdentity: bad class");
    d.device_class = *cls;
    return d;
}

SessionKeys derive_session_keys(const Bytes& app_key, const Bytes& app_nonce3,
                                const Bytes& net_id3, uint16_t dev_nonce) {
    auto block = [&](uint8_t tag) {
        Bytes b(16, 0);
        b[0] = tag;
        std::copy(app_nonce3.begin(), app_nonce3.end(), b.begin() + 1);
        std::copy(net_id3.begin(), net_id3.end(), b.begin() + 4);
        b[7] = uint8_t(dev_nonce & 0xFF);
        b[8] = uint8_t(dev_nonce >> 8);
        return b;
    };
    SessionKeys keys;
    keys.nwk_s_key = crypto::aes128_encrypt_block(app_key, block(0x01));
    keys.app_s_key = crypto::aes128_encrypt_block(app_key, block(0x02));
    return keys;
}

const char* to_string(FrameKind k) {
    switch (k) {
        case FrameKind::JoinRequest: return "JoinRequest";
        case FrameKind::JoinAccept: return "JoinAccept";
        case FrameKind::UnconfirmedUp: return "UnconfirmedUp";
        case FrameKind::ConfirmedUp: return "ConfirmedUp";
        case FrameKind::UnconfirmedDown: return "UnconfirmedDown";
        case FrameKind::ConfirmedDown: return "ConfirmedDown";
    }
    return "?";
}

std::optional<FrameKind> frame_kind_from(const std::string& s) {
    static const std::map<std::string, FrameKind> kMap = {
        {"JoinRequest", FrameKind::JoinRequest},
        {"JoinAccept", FrameKind::JoinAccept},
        {"UnconfirmedUp", FrameKind::UnconfirmedUp},
        {"ConfirmedUp", FrameKind::ConfirmedUp},
        {"UnconfirmedDown", FrameKind::UnconfirmedDown},
        {"ConfirmedDown", FrameKind::ConfirmedDown}};
    auto it = kMap.find(s);
    if (it == kMap.end()) return std::nullopt;
    return it->second;
}

Json RxMeta::to_json() const {
    return Json{{"gateway_id", gateway_id}, {"t", t}, {"sf", sf}, {"bw_hz", bw_hz}, {"rssi", rssi}};
}

RxMeta RxMeta::from_json(const Json& j) {
    RxMeta m;
    m.gateway_id = j.at("gateway_id").get<std::string>();
    m.t = j.at("t").get<SimTime>();
    m.sf = j.at("sf").get<int>();
    m.bw_hz = j.at("bw_hz").get<int>();
    m.rssi = j.at("rssi").get<double>();
    return m;
}

Json LoraFrame::to_json() const {
    Json j{{"kind", to_string(kind)}, {"mic_hex", to_hex(mic)}};
    if (!dev_eui.empty()) j["dev_eui_hex"] = to_hex(dev_eui);
    if (!app_eui.empty()) j["app_eui_hex"] = to_hex(app_eui);
    if (kind == FrameKind::JoinRequest) j["dev_nonce"] = dev_nonce;
    if (!dev_addr.empty()) j["dev_addr_hex"] = to_hex(dev_addr);
    if (kind != FrameKind::JoinRequest && kind != FrameKind::JoinAccept) {
        j["fcnt"] = fcnt;
        j["mac_command"] = mac_command;
    }
    if (!payload.empty()) j["payload_b64"] = to_base64(payload);
    if (rx_meta) j["rx_meta"] = rx_meta->to_json();
    return j;
}

LoraFrame LoraFrame::from_json(const Json& j) {
    LoraFrame f;
    auto kind = frame_kind_from(j.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("LoraFrame: bad kind");
    f.kind = *kind;
    if (j.contains("dev_eui_hex")) f.dev_eui = from_hex(j.at("dev_eui_hex").get<std::string>());
    if (j.contains("app_eui_hex")) f.app_eui = from_hex(j.at("app_eui_hex").get<std::string>());
    f.dev_nonce = j.value("dev_nonce", 0);
    if (j.contains("dev_addr_hex")) f.dev_addr = from_hex(j.at("dev_addr_hex").get<std::string>());
    f.fcnt = j.value("fcnt", 0u);
    f.mac_command = j.value("mac_command", false);
    if (j.contains("payload_b64")) f.payload = from_base64(j.at("payload_b64").get<std::string>());
    if (j.contains("mic_hex")) f.mic = from_hex(j.at("mic_hex").get<std::string>());
    if (f.payload.size() > kMaxPayload) throw std::invalid_argument("LoraFrame: payload too long");
    if (j.contains("rx_meta")) f.rx_meta = RxMeta::from_json(j.at("rx_meta"));
    return f;
}

Bytes frame_mic(const Bytes& key, const LoraFrame& frame) {
    std::string input;
    switch (frame.kind) {
        case FrameKind::JoinRequest:
            input = "join-request|" + to_hex(frame.dev_eui) + "|" + to_hex(frame.app_eui) + "|" +
                    std::to_string(frame.dev_nonce);
            break;
        case FrameKind::JoinAccept:
            // over the ciphertext so the device can check before decrypting
            input = "join-accept|" + to_hex(frame.payload);
            break;
        default:
            input = std::string(to_string(frame.kind)) + "|" + to_hex(frame.dev_addr) + "|" +
                    std::to_string(frame.fcnt) + "|" + (frame.mac_command ? "1" : "0") + "|" +
                    to_hex(frame.payload);
    }
    Bytes mac = crypto::aes128_cmac(key, to_bytes(input));
    mac.resize(4);
    return mac;
}

Bytes crypt_app_payload(const Bytes& app_s_key, const Bytes& dev_addr, uint32_t fcnt,
                        bool downlink, const Bytes& data) {
    Bytes nonce(16, 0);
    nonce[0] = 0x01;
    std::copy(dev_addr.begin(), dev_addr.end(), nonce.begin() + 1);
    nonce[5] = downlink ? 1 : 0;
    nonce[6] = uint8_t(fcnt >> 24);
    nonce[7] = uint8_t(fcnt >> 16);
    nonce[8] = uint8_t(fcnt >> 8);
    nonce[9] = uint8_t(fcnt);
    return crypto::aes128_ctr(app_s_key, nonce, data);
}

// ---------------------------------------------------------------------------
// Radio

void LoraRadio::add_link(const Bytes& dev_eui, const std::string& gateway_id, double rssi,
                         double noise) {
    links_[to_hex(dev_eui)].push_back(Link{gateway_id, rssi, noise});
}

void LoraRadio::attach_gateway(LoraGateway* gw) { gateways_[gw->id()] = gw; }

void LoraRadio::detach_gateway(const std::string& gateway_id) { gateways_.erase(gateway_id); }

void LoraRadio::attach_device(const Bytes& dev_eui, DeviceRx rx) {
    devices_[to_hex(dev_eui)] = std::move(rx);
}

void LoraRadio::transmit_uplink(const Bytes& dev_eui, const RadioParams& params, LoraFrame frame) {
    auto it = links_.find(to_hex(dev_eui));
    if (it == links_.end()) return;
    SimTime now = clock_->now();
    for (const auto& link : it->second) {
        auto gw = gateways_.find(link.gateway_id);
        if (gw == gateways_.end()) continue;
        double rssi = link.rssi;
        if (link.noise > 0) {
            // uniform jitter in [-noise, +noise], quantized to 0.01 dB
            int steps = int(link.noise * 200.0);
            rssi += (double(rng_->below(uint64_t(steps) + 1)) / 100.0) - link.noise;
        }
        gw->second->on_radio_uplink(frame, rssi, now, params);
    }
}

void LoraRadio::transmit_downlink(const std::string& gateway_id, const Bytes& dev_eui,
                                  LoraFrame frame) {
    auto it = links_.find(to_hex(dev_eui));
    if (it == links_.end()) return;
    bool linked = std::any_of(it->second.begin(), it->second.end(),
                              [&](const Link& l) { return l.gateway_id == gateway_id; });
    if (!linked) return;
    auto dev = devices_.find(to_hex(dev_eui));
    if (dev != devices_.end()) dev->second(frame, clock_->now());
}

// ---------------------------------------------------------------------------
// Device

LoraDevice::LoraDevice(Clock* clock, Rng* rng, LoraRadio* radio, DeviceIdentity identity,
                       RadioParams params)
    : clock_(clock), rng_(rng), radio_(radio), identity_(std::move(identity)), params_(params) {
    if (!radio_params_valid(params_)) throw std::invalid_argument("LoraDevice: bad radio params");
    radio_->attach_device(identity_.dev_eui,
                          [this](const LoraFrame& f, SimTime t) { on_radio_rx(f, t); });
}

void LoraDevice::start_join() {
    last_dev_nonce_ = uint16_t(rng_->next_u32());
    LoraFrame req;
    req.kind = FrameKind::JoinRequest;
    req.dev_eui = identity_.dev_eui;
    req.app_eui = identity_.app_eui;
    req.dev_nonce = last_dev_nonce_;
    req.mic = frame_mic(identity_.app_key, req);
    last_uplink_t_ = clock_->now();
    radio_->transmit_uplink(identity_.dev_eui, params_, std::move(req));
}

bool LoraDevice::activate_abp(SessionKeys preset) {
    if (preset.dev_addr.size() != 4 || preset.nwk_s_key.size() != 16 ||
        preset.app_s_key.size() != 16)
        return false;
    session_ = std::move(preset);
    return true;
}

std::optional<uint32_t> LoraDevice::send_uplink(const Bytes& app_payload, bool confirmed) {
    if (!session_ || app_payload.size() > kMaxPayload) return std::nullopt;
    LoraFrame f;
    f.kind = confirmed ? FrameKind::ConfirmedUp : FrameKind::UnconfirmedUp;
    f.dev_addr = session_->dev_addr;
    f.fcnt = session_->fcnt_up;
    f.payload = crypt_app_payload(session_->app_s_key, f.dev_addr, f.fcnt, false, app_payload);
    f.mic = frame_mic(session_->nwk_s_key, f);
    uint32_t used = session_->fcnt_up;
    session_->fcnt_up += 1;
    last_uplink_t_ = clock_->now();
    last_uplink_frame_ = f;
    radio_->transmit_uplink(identity_.dev_eui, params_, std::move(f));
    return used;
}

bool LoraDevice::retransmit_last() {
    if (!last_uplink_frame_) return false;
    last_uplink_t_ = clock_->now();
    radio_->transmit_uplink(identity_.dev_eui, params_, *last_uplink_frame_);
    return true;
}

void LoraDevice::on_radio_rx(const LoraFrame& frame, SimTime t) {
    auto windows = schedule_class_windows(identity_.device_class, last_uplink_t_, window_cfg_);
    if (!within_any_window(windows, t)) {
        ++rejected_frames_;
        return;
    }
    if (frame.kind == FrameKind::JoinAccept) {
        handle_join_accept(frame);
        return;
    }
    if (frame.kind == FrameKind::UnconfirmedDown || frame.kind == FrameKind::ConfirmedDown) {
        handle_downlink(frame);
        return;
    }
    ++rejected_frames_;
}

void LoraDevice::handle_join_accept(const LoraFrame& frame) {
    if (session_) return;  // already joined
    if (frame.mic != frame_mic(identity_.app_key, frame)) {
        ++rejected_frames_;
        return;
    }
    Bytes nonce(16, 0);
    nonce[0] = 0x4a;
    nonce[14] = uint8_t(last_dev_nonce_ >> 8);
    nonce[15] = uint8_t(last_dev_nonce_ & 0xFF);
    Bytes plain = crypto::aes128_ctr(identity_.app_key, nonce, frame.payload);
    if (plain.size() != 10) {
        ++rejected_frames_;
        return;
    }
    Bytes dev_addr(plain.begin(), plain.begin() + 4);
    Bytes app_nonce(plain.begin() + 4, plain.begin() + 7);
    Bytes net_id(plain.begin() + 7, plain.begin() + 10);
    SessionKeys keys = derive_session_keys(identity_.app_key, app_nonce, net_id, last_dev_nonce_);
    keys.dev_addr = dev_addr;
    session_ = std::move(keys);
}

void LoraDevice::handle_downlink(const LoraFrame& frame) {
    if (!session_ || frame.dev_addr != session_->dev_addr) {
        ++rejected_frames_;
        return;
    }
    if (frame.mic != frame_mic(session_->nwk_s_key, frame)) {
        ++rejected_frames_;
        return;
    }
    if (frame.fcnt < session_->fcnt_down) {
        ++rejected_frames_;
        return;
    }
    session_->fcnt_down = frame.fcnt + 1;
    if (frame.mac_command) {
        Json cmd = Json::parse(sbacore::to_string(frame.payload), nullptr, false);
        if (cmd.is_object() && cmd.value("type", "") == "link-adr") {
            int sf = cmd.value("sf", params_.sf);
            RadioParams next = params_;
            next.sf = sf;
            if (radio_params_valid(next)) params_ = next;
        }
        return;
    }
    downlink_payloads_.push_back(
        crypt_app_payload(session_->app_s_key, frame.dev_addr, frame.fcnt, true, frame.payload));
}

// ---------------------------------------------------------------------------
// Gateway

LoraGateway::LoraGateway(Clock* clock, Rng*, LoraRadio* radio, std::string id, RadioParams params)
    : clock_(clock), radio_(radio), id_(std::move(id)), params_(params) {
    radio_->attach_gateway(this);
}

void LoraGateway::set_backhaul(GatewayBackhaul backhaul) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    backhaul_ = std::move(backhaul);
    while (backhaul_ && !buffer_.empty()) {
        if (!backhaul_(buffer_.front())) break;
        buffer_.pop_front();
    }
}

void LoraGateway::clear_backhaul() {
    std::lock_guard<std::recursive_mutex> lock(mu_); backhaul_ = nullptr; }

void LoraGateway::forward_or_buffer(Json doc) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    if (backhaul_ && backhaul_(doc)) return;
    buffer_.push_back(std::move(doc));
    if (buffer_.size() > kBufferCap) {
        buffer_.pop_front();
        ++dropped_;
    }
}

void LoraGateway::on_radio_uplink(const LoraFrame& frame, double rssi, SimTime t,
                                  const RadioParams& tx_params) {
    LoraFrame stamped = frame;
    stamped.rx_meta = RxMeta{id_, t, tx_params.sf, tx_params.bw_hz, rssi};
    forward_or_buffer(Json{{"type", "uplink"}, {"gateway_id", id_}, {"frame", stamped.to_json()}});
}

void LoraGateway::on_downlink_doc(const Json& doc) {
    LoraFrame frame = LoraFrame::from_json(doc.at("frame"));
    Bytes dev_eui = from_hex(doc.at("dev_eui_hex").get<std::string>());
    SimTime tx_at = doc.value("tx_at_us", clock_->now());
    clock_->schedule_at(tx_at, [this, frame = std::move(frame), dev_eui = std::move(dev_eui)] {
        radio_->transmit_downlink(id_, dev_eui, frame);
    });
}

// ---------------------------------------------------------------------------
// Join server

void JoinServer::provision(const DeviceIdentity& identity) {
    devices_[to_hex(identity.dev_eui)] = identity;
}

bool JoinServer::provisioned(const Bytes& dev_eui) const {
    return devices_.count(to_hex(dev_eui)) > 0;
}

std::optional<JoinServer::JoinResult> JoinServer::handle_join_request(const LoraFrame& request) {
    auto it = devices_.find(to_hex(request.dev_eui));
    if (it == devices_.end()) return std::nullopt;  // unknown EUI: silence
    const DeviceIdentity& dev = it->second;
    if (request.mic != frame_mic(dev.app_key, request)) return std::nullopt;
    auto& used = used_nonces_[to_hex(request.dev_eui)];
    if (used.count(request.dev_nonce)) return std::nullopt;  // replayed join
    used.insert(request.dev_nonce);

    Bytes app_nonce = rng_->bytes(3);
    Bytes dev_addr;
    put_u32_be(dev_addr, next_dev_addr_++);

    SessionKeys keys = derive_session_keys(dev.app_key, app_nonce, net_id_, request.dev_nonce);
    keys.dev_addr = dev_addr;
    app_keys_by_addr_[to_hex(dev_addr)] = keys.app_s_key;

    Bytes plain = dev_addr;
    plain.insert(plain.end(), app_nonce.begin(), app_nonce.end());
    plain.insert(plain.end(), net_id_.begin(), net_id_.end());
    Bytes nonce(16, 0);
    nonce[0] = 0x4a;
    nonce[14] = uint8_t(request.dev_nonce >> 8);
    nonce[15] = uint8_t(request.dev_nonce & 0xFF);

    LoraFrame accept;
    accept.kind = FrameKind::JoinAccept;
    accept.dev_eui = request.dev_eui;
    accept.payload = crypto::aes128_ctr(dev.app_key, nonce, plain);
    accept.mic = frame_mic(dev.app_key, accept);

    JoinResult result;
    result.accept = std::move(accept);
    result.nwk_s_key = keys.nwk_s_key;
    result.keys = std::move(keys);
    return result;
}

std::optional<Bytes> JoinServer::app_s_key(const Bytes& dev_addr) const {
    auto it = app_keys_by_addr_.find(to_hex(dev_addr));
    if (it == app_keys_by_addr_.end()) return std::nullopt;
    return it->second;
}

const DeviceIdentity* JoinServer::identity(const Bytes& dev_eui) const {
    auto it = devices_.find(to_hex(dev_eui));
    return it == devices_.end() ? nullptr : &it->second;
}

void JoinServer::register_abp(const Bytes& dev_addr, const Bytes& app_s_key) {
    app_keys_by_addr_[to_hex(dev_addr)] = app_s_key;
}

void AppServer::on_upstream(const Bytes& dev_addr, uint32_t fcnt, const Bytes& ciphertext) {
    auto key = join_server_->app_s_key(dev_addr);
    if (!key) return;
    deliveries_.push_back(
        Delivery{dev_addr, fcnt, crypt_app_payload(*key, dev_addr, fcnt, false, ciphertext)});
}

// ---------------------------------------------------------------------------
// Network server

NetworkServer::NetworkServer(Clock* clock, JoinServer* join_server, AppServer* app_server,
                             SimDuration dedup_window)
    : clock_(clock), join_server_(join_server), app_server_(app_server),
      dedup_window_(dedup_window) {}

void NetworkServer::set_gateway_path(const std::string& gateway_id, DownlinkPath path) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    gateway_paths_[gateway_id] = std::move(path);
}

NetworkServer::DeviceSession* NetworkServer::session_by_addr(const Bytes& dev_addr) {
    auto it = sessions_.find(to_hex(dev_addr));
    return it == sessions_.end() ? nullptr : &it->second;
}

bool NetworkServer::activate_abp(const DeviceIdentity& identity, const SessionKeys& keys) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    if (keys.dev_addr.size() != 4 || keys.nwk_s_key.size() != 16 || keys.app_s_key.size() != 16)
        return false;
    std::string addr = to_hex(keys.dev_addr);
    if (sessions_.count(addr)) return false;  // dev_addr collision
    DeviceSession s;
    s.dev_addr = keys.dev_addr;
    s.nwk_s_key = keys.nwk_s_key;
    s.device_class = identity.device_class;
    s.dev_eui = identity.dev_eui;
    sessions_[addr] = std::move(s);
    join_server_->register_abp(keys.dev_addr, keys.app_s_key);
    return true;
}

void NetworkServer::handle_uplink_doc(const Json& doc) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    LoraFrame frame = LoraFrame::from_json(doc.at("frame"));
    if (!frame.rx_meta) return;
    std::string key;
    if (frame.kind == FrameKind::JoinRequest)
        key = "join:" + to_hex(frame.dev_eui) + ":" + std::to_string(frame.dev_nonce);
    else
        key = "data:" + to_hex(frame.dev_addr) + ":" + std::to_string(frame.fcnt);

    auto it = pending_.find(key);
    if (it != pending_.end()) {
        it->second.copies.push_back(std::move(frame));
        return;
    }
    PendingUplink pending;
    pending.copies.push_back(std::move(frame));
    pending.timer = clock_->schedule_after(dedup_window_, [this, key] { finish_dedup(key); });
    pending_[key] = std::move(pending);
}

void NetworkServer::finish_dedup(const std::string& key) {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = pending_.find(key);
    if (it == pending_.end()) return;
    std::vector<LoraFrame> copies = std::move(it->second.copies);
    pending_.erase(it);
    duplicates_eliminated_ += copies.size() - 1;

    // mixed MICs under one (dev_addr, fcnt) are an attack indicator
    for (const auto& c : copies) {
        if (c.mic != copies.front().mic) {
            ++security_events_;
            return;
        }
    }
    // best gateway: strongest rssi, ties to the lexicographically first id
    const LoraFrame* best = &copies.front();
    for (const auto& c : copies) {
        if (c.rx_meta->rssi > best->rx_meta->rssi ||
            (c.rx_meta->rssi == best->rx_meta->rssi &&
             c.rx_meta->gateway_id < best->rx_meta->gateway_id))
            best = &c;
    }
    LoraFrame chosen = *best;
    // retain every copy's metadata for ADR
    double best_rssi = chosen.rx_meta->rssi;
    for (const auto& c : copies) best_rssi = std::max(best_rssi, c.rx_meta->rssi);
    chosen.rx_meta->rssi = best_rssi;

    if (chosen.kind == FrameKind::JoinRequest)
        process_join(chosen);
    else
        process_frame(chosen);
}

void NetworkServer::process_join(const LoraFrame& frame) {
    auto result = join_server_->handle_join_request(frame);
    if (!result) return;  // silence on unknown/replayed/bad-mic joins

    DeviceSession s;
    s.dev_addr = result->keys.dev_addr;
    s.nwk_s_key = result->nwk_s_key;
    s.dev_eui = frame.dev_eui;
    if (auto identity = join_server_->identity(frame.dev_eui))
        s.device_class = identity->device_class;
    sessions_[to_hex(s.dev_addr)] = s;

    LoraFrame accept = result->accept;
    send_downlink(sessions_[to_hex(s.dev_addr)], std::move(accept), frame.rx_meta->t,
                  frame.rx_meta->gateway_id);
}

void NetworkServer::process_frame(const LoraFrame& frame) {
    DeviceSession* session = session_by_addr(frame.dev_addr);
    if (!session) return;
    if (frame.mic != frame_mic(session->nwk_s_key, frame)) {
        ++security_events_;
        return;
    }
    if (int64_t(frame.fcnt) <= session->last_fcnt) {
        ++replays_rejected_;
        return;
    }
    session->last_fcnt = frame.fcnt;
    // the uplink itself tells the network the device's current data rate
    session->params.sf = frame.rx_meta->sf;
    session->params.bw_hz = frame.rx_meta->bw_hz;
    session->adr_history.push_back(frame.rx_meta->rssi);
    if (session->adr_history.size() > adr_config.min_history)
        session->adr_history.erase(session->adr_history.begin());

    if (!frame.mac_command) {
        app_server_->on_upstream(frame.dev_addr, frame.fcnt, frame.payload);
        ++upstream_deliveries_;
    }

    // confirmed uplinks get an acknowledgement in the next window
    if (frame.kind == FrameKind::ConfirmedUp) {
        LoraFrame ack;
        ack.kind = FrameKind::UnconfirmedDown;
        ack.dev_addr = session->dev_addr;
        ack.mac_command = true;
        ack.payload = to_bytes(canonical_json(Json{{"type", "ack"}, {"fcnt", frame.fcnt}}));
        send_downlink(*session, std::move(ack), frame.rx_meta->t, frame.rx_meta->gateway_id);
    }

    // adaptive data rate: one SF step when the margin crosses the threshold
    auto adjusted = adr_adjust(session->params, session->adr_history, adr_config);
    if (adjusted) {
        session->params = *adjusted;
        LoraFrame cmd;
        cmd.kind = FrameKind::UnconfirmedDown;
        cmd.dev_addr = session->dev_addr;
        cmd.mac_command = true;
        cmd.payload =
            to_bytes(canonical_json(Json{{"type", "link-adr"}, {"sf", adjusted->sf}}));
        send_downlink(*session, std::move(cmd), frame.rx_meta->t, frame.rx_meta->gateway_id);
        session->adr_history.clear();
    }
}

void NetworkServer::send_downlink(const DeviceSession& session_in, LoraFrame frame,
                                  SimTime uplink_t, const std::string& via_gateway) {
    DeviceSession* session = session_by_addr(session_in.dev_addr);
    if (!session) return;
    if (frame.kind != FrameKind::JoinAccept) {
        frame.fcnt = session->fcnt_down;
        session->fcnt_down += 1;
        frame.mic = frame_mic(session->nwk_s_key, frame);
    }
    auto path = gateway_paths_.find(via_gateway);
    if (path == gateway_paths_.end()) return;

    SimTime now = clock_->now();
    SimTime tx_at = now;
    if (session->device_class != DeviceClass::C) {
        auto windows = schedule_class_windows(session->device_class, uplink_t, window_config);
        tx_at = windows.front().start;
        for (const auto& w : windows) {
            if (w.start >= now) {
                tx_at = w.start;
                break;
            }
        }
    }
    path->second(Json{{"type", "downlink"},
                      {"dev_eui_hex", to_hex(session->dev_eui)},
                      {"tx_at_us", tx_at},
                      {"frame", frame.to_json()}});
}

std::optional<RadioParams> NetworkServer::device_params(const Bytes& dev_addr) const {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = sessions_.find(to_hex(dev_addr));
    if (it == sessions_.end()) return std::nullopt;
    return it->second.params;
}

}  // namespace sbacore::lorawan
