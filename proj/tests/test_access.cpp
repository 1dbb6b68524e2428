/* SPDX-License-Identifier: Apache-2.0 */
#include <doctest.h>

#include "core_fixture.hpp"
#include "sbacore/n3iwf.hpp"
#include "sbacore/ran.hpp"

using namespace sbacore;
using testing_fixture::CoreFixture;

namespace {

struct AccessFixture : CoreFixture {
    std::unique_ptr<N3iwf> n3iwf;
    std::unique_ptr<EmGnb> gnb;
    std::vector<Bytes> dn_internet;
    std::vector<Bytes> dn_lorawan;

    AccessFixture() {
        add_pcf();
        add_amf();
        add_session_plane({{"internet", "10.60.0.0/24"}, {"lorawan", "10.70.0.0/24"}});
        n3iwf = std::make_unique<N3iwf>(ctx, "n3iwf-1", N3iwfConfig{}, &fabric);
        NfProfile np;
        np.instance_id = "n3iwf-1";
        np.nf_type = NfType::N3IWF;
        nrf_client::register_nf(ctx, "n3iwf-1", np);

        gnb = std::make_unique<EmGnb>(ctx, "gnb-1", "amf-1",
                                      std::vector<CellConfig>{{"c1", {0, 0}, 500.0},
                                                              {"c2", {900, 0}, 500.0}},
                                      &fabric);
        upf->attach_dn("internet", [this](uint32_t, const Bytes& p) { dn_internet.push_back(p); });
        upf->attach_dn("lorawan", [this](uint32_t, const Bytes& p) { dn_lorawan.push_back(p); });
    }

    std::unique_ptr<NonTgppPeer> make_peer(const std::string& peer_id, const std::string& supi,
                                           const std::string& key_hex) {
        NonTgppPeer::Config cfg;
        cfg.peer_id = peer_id;
        cfg.supi = Supi::parse(supi);
        cfg.long_term_key = from_hex(key_hex);
        cfg.requested_nssai = {Snssai::make(1, 1)};
        auto peer = std::make_unique<NonTgppPeer>(
            ctx, cfg, [this, peer_id](const Bytes& wire) { n3iwf->on_y2_frame(peer_id, wire); });
        n3iwf->connect_peer(peer_id,
                            [raw = peer.get()](const Bytes& wire) { raw->on_y2_frame(wire); });
        return peer;
    }
};

const char* kGwSupi = "imsi-001017000000001";
const char* kUeSupi = "imsi-001011234567890";
const char* kKey = "000102030405060708090a0b0c0d0e0f";

}  // namespace

TEST_CASE("non-3gpp attach: nwu, registration, pdu session") {
    AccessFixture f;
    f.provision_subscriber(kGwSupi, kKey, {Snssai::make(1, 1)}, {"lorawan"});
    auto peer = f.make_peer("gw-host-1", kGwSupi, kKey);
    peer->attach();
    f.clock.advance_to(sim_sec(1));

    CHECK(peer->registered());
    CHECK(peer->ready());
    REQUIRE(peer->ue_ip().has_value());
    CHECK(*peer->ue_ip() == "10.70.0.1");
    CHECK(f.n3iwf->tunnel_state("gw-host-1") == NwuState::Established);
}

TEST_CASE("nas parity: identical kind sequence over both accesses") {
    AccessFixture f;
    f.provision_subscriber(kUeSupi, kKey);
    f.provision_subscriber(kGwSupi, kKey, {Snssai::make(1, 1)}, {"lorawan"});

    EmUe ue(f.ctx, Supi::parse(kUeSupi), from_hex(kKey), {0, 0}, {Snssai::make(1, 1)});
    REQUIRE(ue.attach(f.gnb.get()) == AttachOutcome::Registered);

    auto peer = f.make_peer("gw-host-1", kGwSupi, kKey);
    peer->attach();
    f.clock.advance_to(sim_sec(1));
    REQUIRE(peer->registered());

    auto ue_kinds = f.nas_log.kinds_for(kUeSupi);
    auto gw_kinds = f.nas_log.kinds_for(kGwSupi);
    // compare the registration prefix (the gateway continues with session NAS)
    REQUIRE(ue_kinds.size() >= 4);
    REQUIRE(gw_kinds.size() >= 4);
    for (size_t i = 0; i < 4; ++i) CHECK(ue_kinds[i] == gw_kinds[i]);
    CHECK(ue_kinds[0] == "RegistrationRequest");
    CHECK(ue_kinds[3] == "RegistrationAccept");

    // accesses were labeled correctly at the AMF boundary
    for (const auto& r : f.nas_log.snapshot()) {
        if (r.supi == kUeSupi) CHECK(r.access == "3gpp");
        if (r.supi == kGwSupi) CHECK(r.access == "non-3gpp");
    }
}

TEST_CASE("nwu auth failure closes the tunnel") {
    AccessFixture f;
    f.provision_subscriber(kGwSupi, kKey, {Snssai::make(1, 1)}, {"lorawan"});
    auto peer = f.make_peer("gw-host-1", kGwSupi,
                            "ffffffffffffffffffffffffffffffff");  // wrong key
    peer->attach();
    f.clock.advance_to(sim_sec(1));
    CHECK_FALSE(peer->registered());
    CHECK(peer->last_error() == "network-token-mismatch");
    // the device never answered, so the tunnel is still in the EAP stage
    CHECK(f.n3iwf->tunnel_state("gw-host-1") == NwuState::EapInProgress);

    // a device whose answer the AUSF rejects: forge the response path by
    // answering with a wrong res over a fresh handshake
    Bytes raw_key = from_hex(kKey);
    auto challenge_supi = std::string(kGwSupi);
    Bytes captured;
    f.n3iwf->connect_peer("forger", [&](const Bytes& wire) { captured = wire; });
    f.n3iwf->on_y2_frame("forger",
                         encode_nwu_frame(NwuStream::Control, 0,
                                          to_bytes(canonical_json(Json{{"type", "nwu-auth-init"},
                                                                      {"peer_id", "forger"},
                                                                      {"supi", challenge_supi}}))));
    f.n3iwf->on_y2_frame(
        "forger", encode_nwu_frame(NwuStream::Control, 0,
                                   to_bytes(canonical_json(Json{{"type", "nwu-auth-response"},
                                                               {"supi", challenge_supi},
                                                               {"res_hex", std::string(64, '0')}}))));
    auto frame = decode_nwu_frame(captured);
    REQUIRE(frame.has_value());
    Json last = Json::parse(to_string(frame->body));
    CHECK(last.at("type") == "nwu-closed");
    CHECK(last.at("cause") == "auth-failed");
    CHECK(f.n3iwf->tunnel_state("forger") == NwuState::Closed);
}

TEST_CASE("replayed handshake message yields a protocol error") {
    AccessFixture f;
    f.provision_subscriber(kGwSupi, kKey, {Snssai::make(1, 1)}, {"lorawan"});

    std::vector<Bytes> to_peer_frames;
    std::vector<Bytes> from_peer_frames;
    NonTgppPeer::Config cfg;
    cfg.peer_id = "gw-host-1";
    cfg.supi = Supi::parse(kGwSupi);
    cfg.long_term_key = from_hex(kKey);
    cfg.requested_nssai = {Snssai::make(1, 1)};
    NonTgppPeer peer(f.ctx, cfg, [&](const Bytes& wire) {
        from_peer_frames.push_back(wire);
        f.n3iwf->on_y2_frame("gw-host-1", wire);
    });
    f.n3iwf->connect_peer("gw-host-1", [&](const Bytes& wire) {
        to_peer_frames.push_back(wire);
        peer.on_y2_frame(wire);
    });
    peer.attach();
    f.clock.advance_to(sim_sec(1));
    REQUIRE(peer.ready());

    // replay the captured auth response after establishment
    REQUIRE(from_peer_frames.size() >= 2);
    size_t before = to_peer_frames.size();
    f.n3iwf->on_y2_frame("gw-host-1", from_peer_frames[1]);  // the nwu-auth-response
    REQUIRE(to_peer_frames.size() == before + 1);
    auto frame = decode_nwu_frame(to_peer_frames.back());
    REQUIRE(frame.has_value());
    CHECK(frame->stream == NwuStream::Control);
    Json msg = Json::parse(to_string(frame->body));
    CHECK(msg.at("type") == "nwu-error");
    CHECK(msg.at("cause") == "protocol-error");
}

TEST_CASE("post-handshake tampering is discarded and counted") {
    AccessFixture f;
    f.provision_subscriber(kGwSupi, kKey, {Snssai::make(1, 1)}, {"lorawan"});
    auto peer = f.make_peer("gw-host-1", kGwSupi, kKey);
    peer->attach();
    f.clock.advance_to(sim_sec(1));
    REQUIRE(peer->ready());

    // craft a tampered userplane frame (valid format, corrupt ciphertext)
    Bytes wire = encode_nwu_frame(NwuStream::UserPlane, 12345, Bytes(32, 0xAB));
    f.n3iwf->on_y2_frame("gw-host-1", wire);
    CHECK(f.n3iwf->integrity_drops() == 1);
    CHECK(f.n3iwf->tunnel_state("gw-host-1") == NwuState::Established);
}

TEST_CASE("userplane bridge: round trip through the upf with isolated tunnel ids") {
    AccessFixture f;
    f.provision_subscriber(kUeSupi, kKey);
    f.provision_subscriber(kGwSupi, kKey, {Snssai::make(1, 1)}, {"lorawan"});

    // one 3gpp session for namespace comparison
    EmUe ue(f.ctx, Supi::parse(kUeSupi), from_hex(kKey), {0, 0}, {Snssai::make(1, 1)});
    REQUIRE(ue.attach(f.gnb.get()) == AttachOutcome::Registered);
    auto ue_session = ue.establish_session("internet", Snssai::make(1, 1));
    REQUIRE(ue_session.has_value());
    uint32_t ue_teid = ue.sessions().at(*ue_session).ul_teid;

    auto peer = f.make_peer("gw-host-1", kGwSupi, kKey);
    std::vector<Json> peer_docs;
    peer->on_doc = [&](const Json& doc) { peer_docs.push_back(doc); };
    peer->attach();
    f.clock.advance_to(sim_sec(1));
    REQUIRE(peer->ready());

    // isolation: non-3gpp uplink teid lives in the high-bit namespace
    CHECK((ue_teid & kNonTgppTunnelBit) == 0);

    // uplink doc lands at the lorawan DN byte-identical
    Json doc{{"type", "uplink"}, {"gateway_id", "gw-1"}, {"n", 7}};
    REQUIRE(peer->send_doc(doc));
    REQUIRE(f.dn_lorawan.size() == 1);
    CHECK(Json::parse(to_string(f.dn_lorawan[0])) == doc);

    // downlink back through the session, decrypted at the peer
    Json down{{"type", "downlink"}, {"answer", 42}};
    f.upf->inject_downlink(ipv4_from_string(*peer->ue_ip()), to_bytes(canonical_json(down)));
    REQUIRE(peer_docs.size() == 1);
    CHECK(peer_docs[0] == down);
}

TEST_CASE("ue attach: coverage boundary and credential check") {
    AccessFixture f;
    f.provision_subscriber(kUeSupi, kKey);

    EmUe center(f.ctx, Supi::parse(kUeSupi), from_hex(kKey), {0, 0}, {Snssai::make(1, 1)});
    CHECK(center.attach(f.gnb.get()) == AttachOutcome::Registered);
    center.deregister();

    EmUe outside(f.ctx, Supi::parse(kUeSupi), from_hex(kKey), {0, 500.001}, {Snssai::make(1, 1)});
    CHECK(outside.attach(f.gnb.get()) == AttachOutcome::NoCell);

    EmUe badkey(f.ctx, Supi::parse(kUeSupi), from_hex("00000000000000000000000000000000"),
                {0, 0}, {Snssai::make(1, 1)});
    CHECK(badkey.attach(f.gnb.get()) == AttachOutcome::Rejected);
}

TEST_CASE("ue send: payload reaches the dn stub; idle send triggers service request") {
    AccessFixture f;
    f.provision_subscriber(kUeSupi, kKey);
    EmUe ue(f.ctx, Supi::parse(kUeSupi), from_hex(kKey), {0, 0}, {Snssai::make(1, 1)});
    REQUIRE(ue.attach(f.gnb.get()) == AttachOutcome::Registered);
    auto session = ue.establish_session("internet", Snssai::make(1, 1));
    REQUIRE(session.has_value());

    Bytes payload(100, 0x5C);
    REQUIRE(ue.send(*session, payload));
    REQUIRE(f.dn_internet.size() == 1);
    CHECK(f.dn_internet[0] == payload);

    // AN release, then send again: a ServiceRequest precedes delivery
    ue.go_idle();
    CHECK(f.amf->context(kUeSupi)->cm == CmState::Idle);
    size_t nas_before = f.nas_log.kinds_for(kUeSupi).size();
    REQUIRE(ue.send(*session, payload));
    CHECK(f.dn_internet.size() == 2);
    auto kinds = f.nas_log.kinds_for(kUeSupi);
    REQUIRE(kinds.size() == nas_before + 1);
    CHECK(kinds.back() == "ServiceRequest");

    // send on a released session fails
    REQUIRE(ue.release_session(*session));
    CHECK_FALSE(ue.send(*session, payload));
    CHECK(ue.last_error() == "no-session");
}

TEST_CASE("ue mobility: reselection within the gnb, loss of coverage, paging") {
    AccessFixture f;
    f.provision_subscriber(kUeSupi, kKey);
    EmUe ue(f.ctx, Supi::parse(kUeSupi), from_hex(kKey), {0, 0}, {Snssai::make(1, 1)});
    REQUIRE(ue.attach(f.gnb.get()) == AttachOutcome::Registered);
    CHECK(*ue.attached_cell() == "c1");

    // move within the same cell: nothing changes
    ue.move({10, 10});
    CHECK(*ue.attached_cell() == "c1");
    CHECK(ue.registered());

    // move into the adjacent cell of the same gNB: idle reselection
    ue.move({900, 10});
    CHECK(*ue.attached_cell() == "c2");
    CHECK(ue.registered());

    // move outside all coverage: CM-Idle, paging fails
    ue.move({5000, 5000});
    CHECK_FALSE(ue.attached_cell().has_value());
    CHECK(f.amf->context(kUeSupi)->cm == CmState::Idle);
    f.amf->page(kUeSupi);
    f.clock.advance_to(f.clock.now() + sim_sec(5));
    CHECK(f.metrics.get("amf.paging_failures") == 1);
    CHECK(f.amf->context(kUeSupi)->cm == CmState::Idle);

    // re-entering coverage makes paging succeed again
    ue.move({0, 0});
    f.amf->page(kUeSupi);
    f.clock.advance_to(f.clock.now() + sim_sec(5));
    CHECK(f.amf->context(kUeSupi)->cm == CmState::Connected);
}

TEST_CASE("coverage predicate equals brute-force distance check") {
    AccessFixture f;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> coord(-1500, 1500);
    for (int i = 0; i < 500; ++i) {
        Point p{coord(rng), coord(rng)};
        bool in_c1 = distance(p, {0, 0}) <= 500.0;
        bool in_c2 = distance(p, {900, 0}) <= 500.0;
        auto cell = f.gnb->covering_cell(p);
        CHECK(cell.has_value() == (in_c1 || in_c2));
        if (cell) CHECK((*cell == "c1") == in_c1);
    }
}
