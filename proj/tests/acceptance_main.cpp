/* SPDX-License-Identifier: Apache-2.0 */
//
// Acceptance suite: every criterion prints one PASS/FAIL line; the binary
// exits non-zero when any criterion fails. Expected values are either
// recomputed here with independent oracles or asserted by the bundled
// scenarios' own expected outcomes.

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>
#include <tuple>

#include "sbacore/bus.hpp"
#include "sbacore/bytes.hpp"
#include "sbacore/crypto.hpp"
#include "sbacore/lorawan.hpp"
#include "sbacore/nrf.hpp"
#include "sbacore/policy.hpp"
#include "sbacore/scenario.hpp"

using namespace sbacore;

namespace {

int g_failures = 0;

void print_result(int number, const std::string& name, bool pass, const std::string& detail = "") {
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << number << ": " << name;
    if (!pass && !detail.empty()) std::cout << "  [" << detail << "]";
    std::cout << "\n";
    if (!pass) ++g_failures;
}

Scenario load(const char* name) {
    return Scenario::load_file(std::string(SCENARIO_DIR) + "/" + name);
}

bool scenario_passed(const RunReport& report, std::string* why = nullptr) {
    if (report.aborted) {
        if (why) *why = "aborted: " + report.abort_reason;
        return false;
    }
    for (const auto& a : report.assertions) {
        if (!a.pass) {
            if (why) *why = a.name + ": " + a.detail;
            return false;
        }
    }
    return true;
}

const AssertionResult* find_assertion(const RunReport& report, const std::string& name) {
    for (const auto& a : report.assertions)
        if (a.name == name) return &a;
    return nullptr;
}

std::string filter_restart_events(const std::string& jsonl, const std::string& restarted) {
    std::istringstream in(jsonl);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        Json entry = Json::parse(line);
        std::string uri = entry.value("uri", "");
        if (uri.rfind("/nnrf-nfm/v1", 0) == 0 && entry.value("src", "") == restarted) continue;
        if (uri.rfind("/nudsf-store/v1/" + restarted + "/", 0) == 0 &&
            entry.value("method", "") == "GET")
            continue;
        out << line << "\n";
    }
    return out.str();
}

// --------------------------------------------------------------------------

void criterion_1_registration() {
    RunReport report = load("registration_basic.json").run();
    std::string why;
    bool pass = scenario_passed(report, &why);
    const auto* nas = find_assertion(report, "nas-sequence-exact");
    pass = pass && nas && nas->pass;
    print_result(1, "end-to-end registration NAS sequence", pass, why);
}

void criterion_2_nas_parity() {
    RunReport report = load("iot_uplink.json").run();
    std::string why;
    bool pass = !report.aborted;
    const auto* parity = find_assertion(report, "nas-parity-3gpp-vs-non3gpp");
    if (!parity || !parity->pass) {
        pass = false;
        why = parity ? parity->detail : "assertion missing";
    }
    // byte-for-byte check on the kind fields straight from the NAS log
    std::map<std::string, std::vector<std::string>> kinds;
    std::istringstream in(report.nas_jsonl);
    std::string line;
    while (std::getline(in, line)) {
        Json r = Json::parse(line);
        kinds[r.at("supi")].push_back(r.at("kind"));
    }
    auto& ue = kinds["imsi-001010000000001"];
    auto& gw = kinds["imsi-001017000000001"];
    if (ue.size() < 4 || gw.size() < 4 ||
        !std::equal(ue.begin(), ue.begin() + 4, gw.begin())) {
        pass = false;
        why = "kind sequences differ";
    }
    print_result(2, "NAS parity across 3GPP and non-3GPP access", pass, why);
}

void criterion_3_cups() {
    RunReport report = load("traffic_cups.json").run();
    std::string why;
    bool pass = scenario_passed(report, &why);
    if (report.metrics.value("upf.injected", int64_t{0}) != 1000) {
        pass = false;
        why = "injected != 1000";
    }
    print_result(3, "CUPS isolation and packet conservation over 1000 packets", pass, why);
}

void criterion_4_recovery() {
    Scenario with_restart = load("recovery_amf.json");
    RunReport restarted = with_restart.run();
    std::string why;
    bool pass = scenario_passed(restarted, &why);

    Json baseline_doc = with_restart.doc();
    Json events = Json::array();
    for (const auto& e : baseline_doc["events"]) {
        std::string action = e.value("action", "");
        if (action != "kill_nf" && action != "restart_nf") events.push_back(e);
    }
    baseline_doc["events"] = events;
    Json assertions = Json::array();
    for (const auto& a : baseline_doc["assertions"])
        if (a.value("key", "") != "amf.contexts_recovered") assertions.push_back(a);
    baseline_doc["assertions"] = assertions;
    RunReport baseline = Scenario::from_json(baseline_doc, SCENARIO_DIR).run();
    if (!scenario_passed(baseline, &why)) pass = false;

    if (filter_restart_events(restarted.trace_jsonl, "amf-1") !=
        filter_restart_events(baseline.trace_jsonl, "amf-1")) {
        pass = false;
        why = "trace differs from no-restart run";
    }
    if (restarted.nas_jsonl != baseline.nas_jsonl) {
        pass = false;
        why = "NAS log differs from no-restart run";
    }
    print_result(4, "stateless AMF recovery without re-registration", pass, why);
}

void criterion_5_nrf_oracle() {
    SimClock clock;
    Rng rng(1);
    TraceLog trace;
    Metrics metrics;
    NasLog nas_log;
    LoopbackBus bus(&clock, &trace);
    RunContext ctx{&clock, &rng, &bus, &metrics, &nas_log, "nrf-1"};
    Nrf nrf(ctx, "nrf-1");

    std::mt19937_64 gen(20240131);
    const std::vector<NfType> types = {NfType::AMF, NfType::SMF, NfType::UPF,
                                       NfType::AUSF, NfType::PCF};
    const std::vector<std::string> services = {"comm", "pdusession", "auth", "policy"};
    std::vector<NfProfile> registered;
    for (int i = 0; i < 50; ++i) {
        NfProfile p;
        p.instance_id = "nf-" + std::to_string(i);
        p.nf_type = types[gen() % types.size()];
        p.load = int(gen() % 101);
        p.capacity = int(gen() % 101);
        if (gen() % 2) p.services.push_back(services[gen() % services.size()]);
        if (gen() % 2) p.snssais.push_back(Snssai::make(int(gen() % 3), gen() % 4));
        nrf.register_profile(p);
        registered.push_back(p);
    }
    bool pass = true;
    std::string why;
    for (int q = 0; q < 20 && pass; ++q) {
        DiscoveryQuery query;
        query.target_type = types[gen() % types.size()];
        if (gen() % 2) query.required_service = services[gen() % services.size()];
        if (gen() % 2) query.snssai = Snssai::make(int(gen() % 3), gen() % 4);

        // independent brute force: filter then sort by the stated key
        std::vector<NfProfile> expected;
        for (const auto& p : registered) {
            if (p.nf_type != query.target_type) continue;
            if (query.required_service &&
                std::find(p.services.begin(), p.services.end(), *query.required_service) ==
                    p.services.end())
                continue;
            if (query.snssai && std::find(p.snssais.begin(), p.snssais.end(), *query.snssai) ==
                                    p.snssais.end())
                continue;
            expected.push_back(p);
        }
        std::sort(expected.begin(), expected.end(), [](const NfProfile& a, const NfProfile& b) {
            return std::make_tuple(a.load, -a.capacity, a.instance_id) <
                   std::make_tuple(b.load, -b.capacity, b.instance_id);
        });
        auto got = nrf.discover(query);
        if (got.size() != expected.size()) {
            pass = false;
            why = "size mismatch on query " + std::to_string(q);
            break;
        }
        for (size_t k = 0; k < got.size(); ++k) {
            if (got[k].instance_id != expected[k].instance_id) {
                pass = false;
                why = "order mismatch on query " + std::to_string(q);
                break;
            }
        }
    }
    print_result(5, "NRF discovery equals brute-force filter+sort oracle", pass, why);
}

void criterion_6_lora_formulas() {
    using namespace lorawan;
    // oracle values recomputed from first principles right here
    double rb_expected = 7.0 * (125000.0 / std::pow(2.0, 7)) * (4.0 / 5.0);  // 5468.75
    double ts_expected = std::pow(2.0, 7) / 125000.0;                        // 1.024 ms
    double rb = lora_bitrate(RadioParams{7, 125000, 4, 5});
    double ts = lora_symbol_time(RadioParams{7, 125000, 4, 5});
    bool pass = std::abs(rb - rb_expected) / rb_expected < 1e-9 &&
                std::abs(rb - 5468.75) / 5468.75 < 1e-9 &&
                std::abs(ts - ts_expected) / ts_expected < 1e-9 &&
                std::abs(ts - 0.001024) / 0.001024 < 1e-9;
    print_result(6, "LoRa bitrate and symbol-time formulas at 1e-9 relative", pass);
}

void criterion_7_otaa_dedup() {
    RunReport report = load("iot_uplink.json").run();
    std::string why;
    bool pass = !report.aborted;
    for (const char* name : {"device-joined-otaa", "one-upstream-delivery",
                             "plaintext-at-app-server", "replay-rejected"}) {
        const auto* a = find_assertion(report, name);
        if (!a || !a->pass) {
            pass = false;
            why = a ? name + (": " + a->detail) : std::string(name) + " missing";
        }
    }
    print_result(7, "OTAA join, 3-gateway dedup, plaintext delivery, replay reject", pass, why);
}

void criterion_8_iot_both_modes() {
    Scenario scenario = load("iot_uplink.json");
    RunReport det = scenario.run();
    RunOptions rt;
    rt.mode = RunMode::Realtime;
    rt.time_scale = 0.25;
    RunReport real = scenario.run(rt);

    std::string why;
    bool pass = scenario_passed(det, &why);
    if (pass && !scenario_passed(real, &why)) pass = false;
    if (pass) {
        // identical assertion outcomes in both modes
        for (size_t i = 0; i < det.assertions.size(); ++i) {
            if (det.assertions[i].pass != real.assertions[i].pass) {
                pass = false;
                why = "assertion outcomes differ: " + det.assertions[i].name;
                break;
            }
        }
    }
    print_result(8, "end-to-end IoT flow in deterministic and realtime TCP modes", pass, why);
}

void criterion_9_slice_selection() {
    SimClock clock;
    Rng rng(2);
    TraceLog trace;
    Metrics metrics;
    NasLog nas_log;
    LoopbackBus bus(&clock, &trace);
    RunContext ctx{&clock, &rng, &bus, &metrics, &nas_log, "nrf-1"};
    Nssf nssf(ctx, "nssf-1");

    std::mt19937_64 gen(77);
    std::map<Snssai, bool> availability;
    for (int sst = 0; sst < 5; ++sst) {
        for (uint32_t sd = 0; sd < 3; ++sd) {
            bool available = gen() % 2;
            availability[Snssai::make(sst, sd)] = available;
            nssf.availability_update(Snssai::make(sst, sd), available,
                                     available ? std::vector<NfInstanceId>{"amf-1"}
                                               : std::vector<NfInstanceId>{});
        }
    }
    bool pass = true;
    std::string why;
    auto random_slice = [&] { return Snssai::make(int(gen() % 5), gen() % 3); };
    for (int i = 0; i < 200 && pass; ++i) {
        std::vector<Snssai> requested, subscribed;
        for (int k = 0; k < int(1 + gen() % 4); ++k) requested.push_back(random_slice());
        for (int k = 0; k < int(gen() % 5); ++k) subscribed.push_back(random_slice());
        auto got = nssf.select(requested, subscribed);

        std::vector<Snssai> expected;
        for (const auto& s : requested) {
            bool sub = std::find(subscribed.begin(), subscribed.end(), s) != subscribed.end();
            bool dup = std::find(expected.begin(), expected.end(), s) != expected.end();
            if (sub && availability[s] && !dup) expected.push_back(s);
        }
        if (got.allowed != expected) {
            pass = false;
            why = "triple " + std::to_string(i);
        }
    }

    // registration with an empty intersection is rejected with the right cause
    RunReport report = load("slice_reject.json").run();
    std::string scenario_why;
    if (!scenario_passed(report, &scenario_why)) {
        pass = false;
        why = scenario_why;
    }
    print_result(9, "NSSF selection equals intersection oracle; empty set rejected", pass, why);
}

void criterion_10_determinism() {
    bool pass = true;
    std::string why;
    for (const char* name : {"registration_basic.json", "iot_uplink.json", "traffic_cups.json"}) {
        Scenario scenario = load(name);
        RunReport r1 = scenario.run();
        RunReport r2 = scenario.run();
        auto hash = [](const std::string& s) { return crypto::sha256(to_bytes(s)); };
        if (hash(r1.trace_jsonl) != hash(r2.trace_jsonl) ||
            hash(r1.nas_jsonl) != hash(r2.nas_jsonl) ||
            hash(canonical_json(r1.metrics)) != hash(canonical_json(r2.metrics))) {
            pass = false;
            why = std::string(name) + " differs between runs";
            break;
        }
    }
    print_result(10, "same-seed runs produce byte-identical traces (hash compare)", pass, why);
}

}  // namespace

int main() {
    std::cout << "acceptance suite\n";
    criterion_1_registration();
    criterion_2_nas_parity();
    criterion_3_cups();
    criterion_4_recovery();
    criterion_5_nrf_oracle();
    criterion_6_lora_formulas();
    criterion_7_otaa_dedup();
    criterion_8_iot_both_modes();
    criterion_9_slice_selection();
    criterion_10_determinism();
    std::cout << (g_failures == 0 ? "all criteria passed\n"
                                  : std::to_string(g_failures) + " criteria failed\n");
    return g_failures == 0 ? 0 : 1;
}
