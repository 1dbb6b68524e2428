/* SPDX-License-Identifier: Apache-2.0 */
#include <doctest.h>

#include <algorithm>
#include <random>

#include "sbacore/nrf.hpp"

using namespace sbacore;

namespace {

struct NrfFixture {
    SimClock clock;
    Rng rng{1};
    TraceLog trace;
    Metrics metrics;
    NasLog nas_log;
    LoopbackBus bus{&clock, &trace};
    RunContext ctx{&clock, &rng, &bus, &metrics, &nas_log, "nrf-1"};
    Nrf nrf{ctx, "nrf-1"};
};

NfProfile make_profile(const std::string& id, NfType type, int load = 0, int capacity = 100) {
    NfProfile p;
    p.instance_id = id;
    p.nf_type = type;
    p.load = load;
    p.capacity = capacity;
    return p;
}

// Independent oracle: brute-force filter + stable sort by the stated key.
std::vector<NfProfile> brute_force_discover(const std::vector<NfProfile>& registered,
                                            const DiscoveryQuery& q) {
    std::vector<NfProfile> out;
    for (const auto& p : registered) {
        if (p.status != NfStatus::Registered) continue;
        if (p.nf_type != q.target_type) continue;
        if (q.required_service &&
            std::find(p.services.begin(), p.services.end(), *q.required_service) ==
                p.services.end())
            continue;
        if (q.snssai && std::find(p.snssais.begin(), p.snssais.end(), *q.snssai) == p.snssais.end())
            continue;
        out.push_back(p);
    }
    std::sort(out.begin(), out.end(), [](const NfProfile& a, const NfProfile& b) {
        return std::make_tuple(a.load, -a.capacity, a.instance_id) <
               std::make_tuple(b.load, -b.capacity, b.instance_id);
    });
    return out;
}

}  // namespace

TEST_CASE("register, duplicate conflict, re-register after deregister") {
    NrfFixture f;
    CHECK(f.nrf.register_profile(make_profile("amf-1", NfType::AMF)).status == 201);
    CHECK(f.nrf.register_profile(make_profile("amf-1", NfType::AMF)).status == 409);
    CHECK(f.nrf.deregister("amf-1").status == 204);
    CHECK(f.nrf.register_profile(make_profile("amf-1", NfType::AMF)).status == 201);
}

TEST_CASE("heartbeat acknowledgement and unknown instance") {
    NrfFixture f;
    f.nrf.register_profile(make_profile("smf-1", NfType::SMF));
    CHECK(f.nrf.heartbeat("smf-1", {}).status == 200);
    CHECK(f.nrf.heartbeat("ghost", {}).status == 404);
}

TEST_CASE("missed heartbeats suspend; one heartbeat restores") {
    NrfFixture f;
    auto p = make_profile("upf-1", NfType::UPF);
    p.heartbeat_period = sim_sec(2);
    f.nrf.register_profile(p);

    f.clock.advance_to(sim_sec(3));  // within 2x period
    DiscoveryQuery q;
    q.target_type = NfType::UPF;
    CHECK(f.nrf.discover(q).size() == 1);

    f.clock.advance_to(sim_sec(5));  // beyond 2x period
    CHECK(f.nrf.discover(q).empty());
    auto got = f.nrf.get_profile("upf-1");
    CHECK(got.body.at("status") == "Suspended");

    CHECK(f.nrf.heartbeat("upf-1", {}).status == 200);
    CHECK(f.nrf.discover(q).size() == 1);
}

TEST_CASE("discovery ordering: load asc, capacity desc, id") {
    NrfFixture f;
    f.nrf.register_profile(make_profile("smf-a", NfType::SMF, 10, 100));
    f.nrf.register_profile(make_profile("smf-b", NfType::SMF, 5, 100));
    f.nrf.register_profile(make_profile("smf-c", NfType::SMF, 5, 50));
    DiscoveryQuery q;
    q.target_type = NfType::SMF;
    auto result = f.nrf.discover(q);
    REQUIRE(result.size() == 3);
    CHECK(result[0].instance_id == "smf-b");
    CHECK(result[1].instance_id == "smf-c");
    CHECK(result[2].instance_id == "smf-a");

    DiscoveryQuery none;
    none.target_type = NfType::NWDAF;
    CHECK(f.nrf.discover(none).empty());
}

TEST_CASE("snssai filter excludes profiles lacking the slice") {
    NrfFixture f;
    auto with = make_profile("smf-x", NfType::SMF);
    with.snssais = {Snssai::make(1, 1)};
    auto without = make_profile("smf-y", NfType::SMF);
    f.nrf.register_profile(with);
    f.nrf.register_profile(without);

    DiscoveryQuery q;
    q.target_type = NfType::SMF;
    q.snssai = Snssai::make(1, 1);
    auto result = f.nrf.discover(q);
    REQUIRE(result.size() == 1);
    CHECK(result[0].instance_id == "smf-x");
}

TEST_CASE("discovery equals brute-force oracle over random profiles and queries") {
    NrfFixture f;
    std::mt19937_64 rng(99);
    const std::vector<NfType> types = {NfType::AMF, NfType::SMF, NfType::UPF, NfType::PCF};
    const std::vector<std::string> service_pool = {"comm", "pdusession", "policy", "disc"};

    std::vector<NfProfile> registered;
    for (int i = 0; i < 50; ++i) {
        NfProfile p;
        p.instance_id = "nf-" + std::to_string(i);
        p.nf_type = types[rng() % types.size()];
        p.load = static_cast<int>(rng() % 101);
        p.capacity = static_cast<int>(rng() % 101);
        if (rng() % 2) p.services.push_back(service_pool[rng() % service_pool.size()]);
        if (rng() % 2) p.snssais.push_back(Snssai::make(static_cast<int>(rng() % 3), rng() % 4));
        REQUIRE(f.nrf.register_profile(p).status == 201);
        registered.push_back(p);
    }
    for (int i = 0; i < 20; ++i) {
        DiscoveryQuery q;
        q.target_type = types[rng() % types.size()];
        if (rng() % 2) q.required_service = service_pool[rng() % service_pool.size()];
        if (rng() % 2) q.snssai = Snssai::make(static_cast<int>(rng() % 3), rng() % 4);
        auto got = f.nrf.discover(q);
        auto expected = brute_force_discover(registered, q);
        REQUIRE(got.size() == expected.size());
        for (size_t k = 0; k < got.size(); ++k) CHECK(got[k].instance_id == expected[k].instance_id);
    }
}

TEST_CASE("bus-facing registration and discovery endpoints") {
    NrfFixture f;
    auto p = make_profile("ausf-1", NfType::AUSF);
    CHECK(nrf_client::register_nf(f.ctx, "ausf-1", p));
    CHECK_FALSE(nrf_client::register_nf(f.ctx, "ausf-1", p));  // conflict
    CHECK(nrf_client::send_heartbeat(f.ctx, "ausf-1", 17));
    auto found = nrf_client::discover(f.ctx, "tester", NfType::AUSF);
    REQUIRE(found.size() == 1);
    CHECK(found[0].load == 17);
    // restart path: PATCH replaces the profile even while Registered
    CHECK(nrf_client::reregister_nf(f.ctx, "ausf-1", p));
}
