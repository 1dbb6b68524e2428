/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "sbacore/context.hpp"
#include "sbacore/ids.hpp"
#include "sbacore/nas.hpp"
#include "sbacore/ue_nas.hpp"
#include "sbacore/userplane.hpp"

namespace sbacore {

// NWu frame, bit-exact: 1-byte stream tag, 4-byte big-endian counter,
// body. Tags 0 (signaling) and 1 (user plane) carry AEAD ciphertext under
// the tunnel key with per-direction nonce counters; tag 2 carries the
// plaintext JSON control messages of the establishment handshake.
enum class NwuStream : uint8_t { Signaling = 0, UserPlane = 1, Control = 2 };

Bytes encode_nwu_frame(NwuStream stream, uint32_t counter, const Bytes& body);
struct NwuFrame {
    NwuStream stream;
    uint32_t counter;
    Bytes body;
};
std::optional<NwuFrame> decode_nwu_frame(const Bytes& wire);

// AEAD seal/open for NWu payloads. direction: 0 = initiator->N3IWF,
// 1 = N3IWF->initiator.
Bytes nwu_seal(const Bytes& channel_key, uint8_t direction, NwuStream stream, uint32_t counter,
               const Bytes& plaintext);
bool nwu_open(const Bytes& channel_key, uint8_t direction, NwuStream stream, uint32_t counter,
              const Bytes& sealed, Bytes& plaintext_out);

enum class NwuState { EapInProgress, Established, Closed };

struct N3iwfConfig {
    Snssai default_snssai = Snssai{1, 1};  // used for AMF selection
    int relay_retries = 3;
    SimDuration relay_backoff = sim_ms(100);
};

// Untrusted non-3GPP interworking: terminates NWu tunnels from peers over
// Y2, relays N1 NAS to an AMF selected through the NRF, and bridges user
// plane frames into UPF tunnels (high-bit tunnel-id namespace).
class N3iwf {
public:
    using PeerSender = std::function<void(const Bytes& wire)>;

    N3iwf(RunContext ctx, NfInstanceId id, N3iwfConfig config, UserPlaneFabric* fabric);
    ~N3iwf();

    const NfInstanceId& id() const { return id_; }

    // Y2 attachment (loopback or TCP behind the callback).
    void connect_peer(const std::string& peer_id, PeerSender to_peer);
    void disconnect_peer(const std::string& peer_id);
    void on_y2_frame(const std::string& peer_id, const Bytes& wire);

    uint64_t integrity_drops() const { return integrity_drops_; }
    std::optional<NwuState> tunnel_state(const std::string& peer_id) const;

private:
    struct SessionBinding {
        int session_id = 0;
        uint32_t ul_teid = 0;
        uint32_t dl_teid = 0;
        std::string upf_node;
        std::string ue_ip;
    };
    struct Tunnel {
        std::string peer_id;
        uint32_t tunnel_id = 0;
        NwuState state = NwuState::EapInProgress;
        Bytes channel_key;
        std::string supi;
        NfInstanceId assigned_amf;
        uint32_t rx_counter = 0;  // next expected from peer
        uint32_t tx_counter = 0;
        std::map<int, SessionBinding> sessions;
        std::map<uint32_t, int> by_dl_teid;
        std::string pending_supi;  // handshake in flight
    };

    // Locking rule: mu_ guards tunnel/peer state only; it is never held
    // across a bus invoke, a fabric delivery or a peer callback. Outbound
    // Y2 frames are queued under the lock and flushed after it is released.
    void handle_control(const std::string& peer_id, const Json& msg);
    void handle_signaling(const std::string& peer_id, const Bytes& plaintext);
    void handle_userplane(const std::string& peer_id, const Bytes& plaintext);
    void relay_nas_to_amf(const std::string& peer_id, const NasMessage& nas, int attempt);
    void queue_control(Tunnel& tunnel, const Json& msg);
    void queue_sealed(Tunnel& tunnel, NwuStream stream, const Bytes& plaintext);
    void flush_outbox();
    SbiResponse handle_n2(const SbiRequest& req);
    void on_fabric_frame(uint32_t dl_teid, Bytes payload);
    Tunnel* tunnel_for_peer(const std::string& peer_id);

    RunContext ctx_;
    NfInstanceId id_;
    N3iwfConfig config_;
    UserPlaneFabric* fabric_;
    mutable std::recursive_mutex mu_;
    std::map<std::string, PeerSender> peers_;
    std::map<std::string, Tunnel> tunnels_;  // by peer id
    std::map<std::string, std::string> peer_by_supi_;
    std::vector<std::pair<std::string, Bytes>> outbox_;  // guarded by mu_
    uint32_t next_tunnel_id_ = 1;
    uint64_t integrity_drops_ = 0;
};

// Device/gateway side of the NWu tunnel: runs the same NAS registration
// sequence as a 3GPP UE, then carries JSON documents over the user-plane
// stream. Event-driven; progress resumes on each received frame.
class NonTgppPeer {
public:
    struct Config {
        std::string peer_id;
        Supi supi;
        Bytes long_term_key;
        std::vector<Snssai> requested_nssai;
        Dnn dnn{"lorawan"};
        Snssai snssai{1, 1};
    };

    using Y2Sender = std::function<void(const Bytes& wire)>;

    NonTgppPeer(RunContext ctx, Config config, Y2Sender y2_send);
    ~NonTgppPeer();

    // Starts NWu establishment followed by registration and one PDU session.
    void attach();
    // Invoked once the PDU session is up (and again after re-attachment).
    std::function<void()> on_ready;
    bool ready() const { return phase_ == Phase::Ready; }
    bool registered() const { return nas_.registered(); }
    std::string last_error() const { return last_error_; }
    const std::optional<std::string>& ue_ip() const { return ue_ip_; }

    // Upstream application document; false when the tunnel is not ready.
    bool send_doc(const Json& doc);
    // Delivered for every downstream application document.
    std::function<void(const Json&)> on_doc;

    // wire from the N3IWF (loopback Y2)
    void on_y2_frame(const Bytes& wire);
    uint64_t integrity_drops() const { return integrity_drops_; }

private:
    enum class Phase { Idle, NwuAuth, Registering, AwaitAccept, SessionSetup, Ready, Failed };

    void queue_control(const Json& msg);
    void queue_nas(const NasMessage& nas);
    void flush_outbox();
    void handle_control(const Json& msg);
    void handle_signaling(const Bytes& plaintext);
    void fail(const std::string& reason);

    RunContext ctx_;
    Config config_;
    Y2Sender y2_send_;
    mutable std::recursive_mutex mu_;
    UeNasCore nas_;
    Phase phase_ = Phase::Idle;
    Bytes channel_key_;
    Bytes last_rand_;
    uint32_t tx_counter_ = 0;
    uint32_t rx_counter_ = 0;
    std::optional<int> session_id_;
    std::optional<std::string> ue_ip_;
    std::string last_error_;
    std::vector<Bytes> outbox_;  // guarded by mu_
    uint64_t integrity_drops_ = 0;
};

}  // namespace sbacore
