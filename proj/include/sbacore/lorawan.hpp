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

#include "sbacore/bytes.hpp"
#include "sbacore/clock.hpp"
#include "sbacore/bus.hpp"

namespace sbacore::lorawan {

using sbacore::Json;

// Radio configuration. SF is limited to 7..10 here; BW to the three
// canonical widths; CR to 4/5..4/8.
struct RadioParams {
    int sf = 7;
    int bw_hz = 125000;
    int cr_num = 4;
    int cr_den = 5;
};

bool radio_params_valid(const RadioParams& p);
// Rb = SF * (BW / 2^SF) * CR  [bits/s]
double lora_bitrate(const RadioParams& p);
// Ts = 2^SF / BW  [s]
double lora_symbol_time(const RadioParams& p);

enum class DeviceClass { A, B, C };
std::optional<DeviceClass> device_class_from(const std::string& s);
const char* to_string(DeviceClass c);

enum class Activation { OTAA, ABP };

struct Window {
    SimTime start = 0;
    SimTime end = 0;  // SimTime max for the open class-C window
};

struct ClassWindowConfig {
    SimDuration rx1_delay = sim_sec(1);
    SimDuration rx2_delay = sim_sec(2);
    SimDuration rx_length = sim_ms(200);
    SimDuration beacon_period = sim_sec(128);
    SimDuration ping_horizon = sim_sec(512);  // class B slots listed this far out
};

// A -> the two short post-uplink windows; B -> class-A windows plus
// beacon-aligned ping slots; C -> one window open from the uplink on.
std::vector<Window> schedule_class_windows(DeviceClass cls, SimTime uplink_time,
                                           const ClassWindowConfig& cfg = {});
bool within_any_window(const std::vector<Window>& windows, SimTime t);

struct AdrConfig {
    size_t min_history = 20;
    double margin_threshold = 10.0;
    // demodulation floor per SF (margin = best rssi - floor[sf])
    std::map<int, double> rssi_floor = {{7, -123.0}, {8, -126.0}, {9, -129.0}, {10, -132.0}};
};

// One-step SF adjustment from recent link quality; BW/CR unchanged.
// Returns nullopt when history is too short or no change is needed.
std::optional<RadioParams> adr_adjust(const RadioParams& current,
                                      const std::vector<double>& recent_best_rssi,
                                      const AdrConfig& cfg = {});

struct DeviceIdentity {
    Bytes dev_eui;  // 8 bytes
    Bytes app_eui;  // 8 bytes
    Bytes app_key;  // 16 bytes, shared with the join server only
    Activation activation = Activation::OTAA;
    DeviceClass device_class = DeviceClass::A;

    static DeviceIdentity from_json(const Json& j);
};

struct SessionKeys {
    Bytes dev_addr;    // 4 bytes
    Bytes nwk_s_key;   // 16 bytes
    Bytes app_s_key;   // 16 bytes
    uint32_t fcnt_up = 0;
    uint32_t fcnt_down = 0;
};

// AES-128 based derivation from the join handshake nonces.
SessionKeys derive_session_keys(const Bytes& app_key, const Bytes& app_nonce3,
                                const Bytes& net_id3, uint16_t dev_nonce);

enum class FrameKind {
    JoinRequest,
    JoinAccept,
    UnconfirmedUp,
    ConfirmedUp,
    UnconfirmedDown,
    ConfirmedDown,
};
const char* to_string(FrameKind k);
std::optional<FrameKind> frame_kind_from(const std::string& s);

struct RxMeta {
    std::string gateway_id;
    SimTime t = 0;
    int sf = 7;
    int bw_hz = 125000;
    double rssi = -120.0;

    Json to_json() const;
    static RxMeta from_json(const Json& j);
};

inline constexpr size_t kMaxPayload = 222;

struct LoraFrame {
    FrameKind kind = FrameKind::UnconfirmedUp;
    Bytes dev_eui;    // join frames
    Bytes app_eui;    // join request
    uint16_t dev_nonce = 0;
    Bytes dev_addr;   // data frames
    uint32_t fcnt = 0;
    bool mac_command = false;  // network command; payload not app-encrypted
    Bytes payload;    // app frames: ciphertext under the app session key
    Bytes mic;        // 4 bytes
    std::optional<RxMeta> rx_meta;

    Json to_json() const;
    static LoraFrame from_json(const Json& j);
};

// MIC = AES-CMAC over the frame's canonical fields, truncated to 4 bytes.
Bytes frame_mic(const Bytes& key, const LoraFrame& frame);

// App payload confidentiality: AES-128-CTR keyed by the app session key,
// nonce derived from (dev_addr, fcnt, direction). Symmetric.
Bytes crypt_app_payload(const Bytes& app_s_key, const Bytes& dev_addr, uint32_t fcnt,
                        bool downlink, const Bytes& data);

class LoraGateway;

// Simulated shared medium: scenario links carry a per-(device, gateway)
// RSSI surrogate; a transmission reaches every linked gateway.
class LoraRadio {
public:
    explicit LoraRadio(Clock* clock, Rng* rng) : clock_(clock), rng_(rng) {}

    void add_link(const Bytes& dev_eui, const std::string& gateway_id, double rssi,
                  double noise = 0.0);
    void attach_gateway(LoraGateway* gw);
    void detach_gateway(const std::string& gateway_id);

    void transmit_uplink(const Bytes& dev_eui, const RadioParams& params, LoraFrame frame);
    // Downlink from one gateway toward a device; the device hears it if a
    // link exists (reciprocal coverage).
    void transmit_downlink(const std::string& gateway_id, const Bytes& dev_eui, LoraFrame frame);

    using DeviceRx = std::function<void(const LoraFrame&, SimTime)>;
    void attach_device(const Bytes& dev_eui, DeviceRx rx);

private:
    struct Link {
        std::string gateway_id;
        double rssi;
        double noise;
    };
    Clock* clock_;
    Rng* rng_;
    std::map<std::string, std::vector<Link>> links_;  // dev_eui hex -> links
    std::map<std::string, LoraGateway*> gateways_;
    std::map<std::string, DeviceRx> devices_;
};

// End device model: join/activation, uplinks, class-driven receive windows.
class LoraDevice {
public:
    LoraDevice(Clock* clock, Rng* rng, LoraRadio* radio, DeviceIdentity identity,
               RadioParams params);

    const DeviceIdentity& identity() const { return identity_; }
    const RadioParams& radio_params() const { return params_; }
    const std::optional<SessionKeys>& session() const { return session_; }
    bool joined() const { return session_.has_value(); }

    void start_join();                       // OTAA: transmit a JoinRequest
    bool activate_abp(SessionKeys preset);   // ABP: session usable immediately
    // Encrypts and transmits an application uplink; returns the fcnt used.
    std::optional<uint32_t> send_uplink(const Bytes& app_payload, bool confirmed = false);
    // Retransmits the previous uplink unchanged (same fcnt and MIC).
    bool retransmit_last();

    const std::vector<Bytes>& received_downlinks() const { return downlink_payloads_; }
    uint64_t rejected_frames() const { return rejected_frames_; }

private:
    void on_radio_rx(const LoraFrame& frame, SimTime t);
    void handle_join_accept(const LoraFrame& frame);
    void handle_downlink(const LoraFrame& frame);

    Clock* clock_;
    Rng* rng_;
    LoraRadio* radio_;
    DeviceIdentity identity_;
    RadioParams params_;
    std::optional<SessionKeys> session_;
    std::optional<LoraFrame> last_uplink_frame_;
    uint16_t last_dev_nonce_ = 0;
    SimTime last_uplink_t_ = 0;
    ClassWindowConfig window_cfg_;
    std::vector<Bytes> downlink_payloads_;
    uint64_t rejected_frames_ = 0;
};

// Uplink transport from a gateway toward the network server. The scenario
// wires this either directly (bench tests) or through the 5G user plane.
using GatewayBackhaul = std::function<bool(const Json& doc)>;

// Gateway: stamps rx metadata, forwards over the backhaul, buffers up to 64
// frames while the backhaul is down (drop-oldest), and transmits queued
// downlinks at their scheduled time.
class LoraGateway {
public:
    static constexpr size_t kBufferCap = 64;

    LoraGateway(Clock* clock, Rng* rng, LoraRadio* radio, std::string id, RadioParams params);

    const std::string& id() const { return id_; }

    void set_backhaul(GatewayBackhaul backhaul);  // empty function = down
    void clear_backhaul();
    bool backhaul_up() const { return static_cast<bool>(backhaul_); }

    // radio side (called by LoraRadio); params are the transmitter's
    void on_radio_uplink(const LoraFrame& frame, double rssi, SimTime t,
                         const RadioParams& tx_params);
    // network-server side: downlink document {frame, tx_at_us}
    void on_downlink_doc(const Json& doc);

    uint64_t dropped_frames() const { return dropped_; }
    size_t buffered() const { return buffer_.size(); }

private:
    void forward_or_buffer(Json doc);

    Clock* clock_;
    LoraRadio* radio_;
    std::string id_;
    RadioParams params_;
    mutable std::recursive_mutex mu_;
    GatewayBackhaul backhaul_;
    std::deque<Json> buffer_;
    uint64_t dropped_ = 0;
};

// Join server: owns app keys and derives session keys; the network server
// only ever receives the network session key.
class JoinServer {
public:
    explicit JoinServer(Rng* rng, Bytes net_id3 = {0x00, 0x00, 0x13})
        : rng_(rng), net_id_(std::move(net_id3)) {}

    void provision(const DeviceIdentity& identity);
    bool provisioned(const Bytes& dev_eui) const;

    struct JoinResult {
        LoraFrame accept;          // encrypted JoinAccept to transmit
        SessionKeys keys;          // server-side copy
        Bytes nwk_s_key;           // handed to the network server
    };
    // Nullopt on unknown EUI, bad MIC or replayed nonce (silent discard).
    std::optional<JoinResult> handle_join_request(const LoraFrame& request);

    std::optional<Bytes> app_s_key(const Bytes& dev_addr) const;  // for the app server
    const DeviceIdentity* identity(const Bytes& dev_eui) const;
    // ABP devices bring preset keys; record the app key for the app server.
    void register_abp(const Bytes& dev_addr, const Bytes& app_s_key);

private:
    Rng* rng_;
    Bytes net_id_;
    uint32_t next_dev_addr_ = 1;
    std::map<std::string, DeviceIdentity> devices_;         // dev_eui hex
    std::map<std::string, std::set<uint16_t>> used_nonces_; // dev_eui hex
    std::map<std::string, Bytes> app_keys_by_addr_;         // dev_addr hex -> AppSKey
};

// Application server: decrypts end-to-end payloads with keys obtained from
// the join server.
class AppServer {
public:
    explicit AppServer(JoinServer* join_server) : join_server_(join_server) {}

    void on_upstream(const Bytes& dev_addr, uint32_t fcnt, const Bytes& ciphertext);
    struct Delivery {
        Bytes dev_addr;
        uint32_t fcnt;
        Bytes plaintext;
    };
    const std::vector<Delivery>& deliveries() const { return deliveries_; }

private:
    JoinServer* join_server_;
    std::vector<Delivery> deliveries_;
};

// Network server: multi-gateway deduplication, MIC and frame-counter
// checks, ADR, class-aware downlink scheduling, join relay.
class NetworkServer {
public:
    using DownlinkPath = std::function<void(const Json& doc)>;

    NetworkServer(Clock* clock, JoinServer* join_server, AppServer* app_server,
                  SimDuration dedup_window = sim_ms(200));

    void set_gateway_path(const std::string& gateway_id, DownlinkPath path);
    void handle_uplink_doc(const Json& doc);

    bool activate_abp(const DeviceIdentity& identity, const SessionKeys& keys);

    uint64_t upstream_deliveries() const { return upstream_deliveries_; }
    uint64_t duplicates_eliminated() const { return duplicates_eliminated_; }
    uint64_t replays_rejected() const { return replays_rejected_; }
    uint64_t security_events() const { return security_events_; }
    std::optional<RadioParams> device_params(const Bytes& dev_addr) const;

    AdrConfig adr_config;
    ClassWindowConfig window_config;

private:
    struct DeviceSession {
        Bytes dev_addr;
        Bytes nwk_s_key;
        int64_t last_fcnt = -1;
        uint32_t fcnt_down = 0;
        DeviceClass device_class = DeviceClass::A;
        RadioParams params;
        std::vector<double> adr_history;  // best rssi per uplink
        Bytes dev_eui;
    };
    struct PendingUplink {
        std::vector<LoraFrame> copies;
        uint64_t timer = 0;
    };

    void finish_dedup(const std::string& key);
    void process_frame(const LoraFrame& frame);
    void process_join(const LoraFrame& frame);
    void send_downlink(const DeviceSession& session, LoraFrame frame, SimTime uplink_t,
                       const std::string& via_gateway);
    DeviceSession* session_by_addr(const Bytes& dev_addr);

    Clock* clock_;
    JoinServer* join_server_;
    AppServer* app_server_;
    SimDuration dedup_window_;
    mutable std::recursive_mutex mu_;
    std::map<std::string, DeviceSession> sessions_;  // dev_addr hex
    std::map<std::string, PendingUplink> pending_;   // dedup key
    std::map<std::string, DownlinkPath> gateway_paths_;
    uint64_t upstream_deliveries_ = 0;
    uint64_t duplicates_eliminated_ = 0;
    uint64_t replays_rejected_ = 0;
    uint64_t security_events_ = 0;
};

}  // namespace sbacore::lorawan
