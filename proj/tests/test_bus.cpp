/* SPDX-License-Identifier: Apache-2.0 */
#include <doctest.h>

#include "sbacore/bus.hpp"

using namespace sbacore;

namespace {

struct BusFixture {
    SimClock clock;
    TraceLog trace;
    LoopbackBus bus{&clock, &trace};
};

SbiRequest make_req(const std::string& src, const std::string& target, SbiMethod m,
                    const std::string& uri, Json body = Json::object()) {
    SbiRequest r;
    r.src = src;
    r.target = target;
    r.method = m;
    r.uri = uri;
    r.body = std::move(body);
    return r;
}

}  // namespace

TEST_CASE("bind rules: conflict on duplicate, rebind after unbind") {
    BusFixture f;
    auto echo = [](const SbiRequest& req) { return SbiResponse::ok(req.body); };
    CHECK(f.bus.bind("amf-1", "/namf-comm/v1", echo).ok);
    CHECK_FALSE(f.bus.bind("amf-1", "/namf-comm/v1", echo).ok);
    f.bus.unbind("amf-1", "/namf-comm/v1");
    CHECK(f.bus.bind("amf-1", "/namf-comm/v1", echo).ok);
    // a second instance may serve the same service prefix
    CHECK(f.bus.bind("amf-2", "/namf-comm/v1", echo).ok);
    CHECK_FALSE(f.bus.bind("amf-1", "bad-prefix", echo).ok);
}

TEST_CASE("invoke: echo, unbound prefix, zero deadline") {
    BusFixture f;
    f.bus.bind("echo-1", "/necho-echo/v1",
               [](const SbiRequest& req) { return SbiResponse::ok(req.body); });

    auto out = f.bus.invoke(make_req("caller", "echo-1", SbiMethod::Get, "/necho-echo/v1/x",
                                     Json{{"k", "v"}}));
    REQUIRE(out.ok());
    CHECK(out.response.body == Json{{"k", "v"}});

    auto miss = f.bus.invoke(make_req("caller", "nobody", SbiMethod::Get, "/necho-echo/v1/x"));
    CHECK(miss.transport == Transport::NotFound);

    auto late = f.bus.invoke(
        make_req("caller", "echo-1", SbiMethod::Get, "/necho-echo/v1/x"), 0);
    CHECK(late.transport == Transport::Timeout);
}

TEST_CASE("request/response correlation under interleaved invokes") {
    BusFixture f;
    f.bus.bind("svc", "/nsvc-s/v1", [&](const SbiRequest& req) {
        // respond with a value derived from the request nonce
        return SbiResponse::ok(Json{{"nonce", req.body.at("nonce")}});
    });
    for (int i = 0; i < 200; ++i) {
        auto out = f.bus.invoke(
            make_req("c" + std::to_string(i % 7), "svc", SbiMethod::Post, "/nsvc-s/v1/op",
                     Json{{"nonce", i}}));
        REQUIRE(out.ok());
        CHECK(out.response.body.at("nonce") == i);
    }
}

TEST_CASE("problem field present iff status >= 400") {
    BusFixture f;
    f.bus.bind("svc", "/nsvc-s/v1", [](const SbiRequest& req) {
        if (req.uri.find("bad") != std::string::npos)
            return SbiResponse::fail(409, "conflict", "duplicate");
        return SbiResponse::ok();
    });
    auto ok = f.bus.invoke(make_req("c", "svc", SbiMethod::Get, "/nsvc-s/v1/fine"));
    CHECK_FALSE(ok.response.problem.has_value());
    auto bad = f.bus.invoke(make_req("c", "svc", SbiMethod::Get, "/nsvc-s/v1/bad"));
    REQUIRE(bad.response.problem.has_value());
    CHECK(bad.response.problem->title == "conflict");
    CHECK(is_allowed_status(bad.response.status));
}

TEST_CASE("subscriptions: delivery, cancellation, fifo order") {
    BusFixture f;
    std::vector<int> seen;
    f.bus.bind("af-1", "/naf-cb/v1", [&](const SbiRequest& req) {
        seen.push_back(req.body.at("event").at("n").get<int>());
        return SbiResponse::ok();
    });
    auto sub = f.bus.create_subscription(Json{{"kind", "test"}}, "af-1", "/naf-cb/v1/notify");

    CHECK(f.bus.notify(sub, Json{{"kind", "test"}, {"n", 1}}) == DeliveryResult::Delivered);
    CHECK(f.bus.notify(sub, Json{{"kind", "test"}, {"n", 2}}) == DeliveryResult::Delivered);
    CHECK(seen == std::vector<int>{1, 2});

    CHECK(f.bus.cancel_subscription(sub));
    CHECK(f.bus.notify(sub, Json{{"kind", "test"}, {"n", 3}}) == DeliveryResult::DeliveryFailed);
    CHECK(seen.size() == 2);

    // publish applies the filter
    auto sub2 = f.bus.create_subscription(Json{{"kind", "test"}}, "af-1", "/naf-cb/v1/notify");
    CHECK(f.bus.publish(Json{{"kind", "other"}, {"n", 9}}) == 0);
    CHECK(f.bus.publish(Json{{"kind", "test"}, {"n", 4}}) == 1);
    CHECK(seen == std::vector<int>{1, 2, 4});
    (void)sub2;
}

TEST_CASE("dead callback degrades subscription") {
    BusFixture f;
    auto sub = f.bus.create_subscription(Json::object(), "gone", "/ncb-x/v1/notify");
    CHECK(f.bus.notify(sub, Json{{"k", 1}}) == DeliveryResult::DeliveryFailed);
    CHECK(f.bus.subscription(sub)->state == SubscriptionState::Degraded);
}

TEST_CASE("af trust gate blocks direct calls without token") {
    BusFixture f;
    f.bus.bind("nef-1", "/nnef-event-exposure/v1",
               [](const SbiRequest&) { return SbiResponse::ok(); });
    f.bus.bind("pcf-1", "/npcf-sm-policy/v1",
               [](const SbiRequest&) { return SbiResponse::ok(); });
    f.bus.set_nef_instance("nef-1");
    f.bus.register_principal("af-low", PrincipalKind::ApplicationFunction, AfTrust::Low);
    f.bus.register_principal("af-high", PrincipalKind::ApplicationFunction, AfTrust::High);

    // NEF reachable, anything else forbidden
    CHECK(f.bus.invoke(make_req("af-low", "nef-1", SbiMethod::Get, "/nnef-event-exposure/v1/x")).ok());
    auto blocked = f.bus.invoke(make_req("af-low", "pcf-1", SbiMethod::Get, "/npcf-sm-policy/v1/x"));
    CHECK(blocked.transport == Transport::Forbidden);

    // token unlocks direct calls
    auto token = f.bus.grant_direct_token("af-high");
    auto req = make_req("af-high", "pcf-1", SbiMethod::Get, "/npcf-sm-policy/v1/x");
    req.headers["x-capability"] = token;
    CHECK(f.bus.invoke(req).ok());

    // blocked attempts never reach the trace
    for (const auto& e : f.trace.snapshot()) {
        CHECK_FALSE((e.src == "af-low" && e.dst == "pcf-1"));
    }
}

TEST_CASE("trace log records t src dst method uri status") {
    BusFixture f;
    f.bus.bind("svc", "/nsvc-s/v1", [](const SbiRequest&) { return SbiResponse::ok(); });
    f.clock.advance_to(sim_ms(1500));
    f.bus.invoke(make_req("c", "svc", SbiMethod::Get, "/nsvc-s/v1/ping"));
    auto entries = f.trace.snapshot();
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].t == sim_ms(1500));
    CHECK(entries[0].src == "c");
    CHECK(entries[0].dst == "svc");
    CHECK(entries[0].method == "GET");
    CHECK(entries[0].uri == "/nsvc-s/v1/ping");
    CHECK(entries[0].status == 200);
    Json line = entries[0].to_json();
    CHECK(line.size() == 6);
}

TEST_CASE("sim clock ordering and cancellation") {
    SimClock clock;
    std::vector<int> order;
    clock.schedule_at(sim_ms(20), [&] { order.push_back(2); });
    clock.schedule_at(sim_ms(10), [&] { order.push_back(1); });
    auto id = clock.schedule_at(sim_ms(15), [&] { order.push_back(99); });
    clock.schedule_at(sim_ms(20), [&] { order.push_back(3); });  // tie: scheduling order
    clock.cancel(id);
    clock.run_until_idle();
    CHECK(order == std::vector<int>{1, 2, 3});
    CHECK(clock.now() == sim_ms(20));
    clock.advance_to(sim_ms(100));
    CHECK(clock.now() == sim_ms(100));
}
