/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/scenario.hpp"

#include <chrono>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "sbacore/amf.hpp"
#include "sbacore/auth_data.hpp"
#include "sbacore/context.hpp"
#include "sbacore/exposure.hpp"
#include "sbacore/iot_bridge.hpp"
#include "sbacore/lorawan.hpp"
#include "sbacore/n3iwf.hpp"
#include "sbacore/nrf.hpp"
#include "sbacore/policy.hpp"
#include "sbacore/ran.hpp"
#include "sbacore/session.hpp"
#include "sbacore/transport_http.hpp"

namespace sbacore {

std::optional<RunMode> run_mode_from(const std::string& s) {
    if (s == "deterministic") return RunMode::Deterministic;
    if (s == "realtime") return RunMode::Realtime;
    return std::nullopt;
}

bool RunReport::all_passed() const {
    if (aborted) return false;
    for (const auto& a : assertions)
        if (!a.pass) return false;
    return true;
}

Json RunReport::to_json() const {
    Json list = Json::array();
    for (const auto& a : assertions)
        list.push_back(Json{{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
    Json j{{"aborted", aborted}, {"assertions", list}, {"metrics", metrics},
           {"all_passed", all_passed()}};
    if (aborted) j["abort_reason"] = abort_reason;
    return j;
}

namespace {

SimTime seconds_to_sim(double s) { return static_cast<SimTime>(s * 1e6); }

Json load_ref_or_inline(const Json& value, const std::string& base_dir, std::string* error) {
    if (value.is_string()) {
        std::string path = value.get<std::string>();
        if (!path.empty() && path[0] != '/') path = base_dir + "/" + path;
        std::ifstream f(path);
        if (!f) {
            if (error) *error = "cannot open " + path;
            return Json();
        }
        Json parsed = Json::parse(f, nullptr, false);
        if (parsed.is_discarded()) {
            if (error) *error = "unparseable JSON in " + path;
            return Json();
        }
        return parsed;
    }
    return value;
}

const std::set<std::string> kKnownActions = {
    "ue_attach",       "ue_establish_session", "ue_release_session", "ue_send",
    "ue_move",         "ue_idle",              "ue_periodic_update", "ue_deregister",
    "ue_service_request", "lora_replay",
    "dn_downlink",     "page",                 "kill_nf",            "restart_nf",
    "gw_attach",       "gw_detach",            "lora_join",          "lora_uplink",
    "lora_abp_activate", "nwdaf_ingest",       "bdt_request",        "nssf_update"};

const std::set<std::string> kKnownAssertions = {
    "registered",   "cm_state",     "nas_kinds",    "nas_parity",    "session_ip",
    "metric",       "conservation", "sbi_clean",    "dn_count",      "dn_payload",
    "ue_received",  "app_deliveries", "app_payload", "upstream_unique", "lora_joined",
    "ue_error",     "gw_ready",     "bdt_result"};

// Everything one run instantiates; destroyed when the run finishes.
struct Runtime {
    const Json& doc;
    std::string base_dir;
    RunOptions options;

    std::unique_ptr<SimClock> sim_clock;
    std::unique_ptr<RealtimeClock> rt_clock;
    Clock* clock = nullptr;
    std::unique_ptr<Rng> rng;
    TraceLog trace;
    Metrics metrics;
    NasLog nas_log;
    std::unique_ptr<Bus> bus;
    std::unique_ptr<UserPlaneFabric> fabric;
    RunContext ctx;

    std::unique_ptr<Nrf> nrf;
    std::shared_ptr<SubscriberStore> store;
    std::unique_ptr<Udm> udm;
    std::unique_ptr<Udr> udr;
    std::unique_ptr<Ausf> ausf;
    std::unique_ptr<Udsf> udsf;
    std::unique_ptr<Pcf> pcf;
    std::unique_ptr<Nssf> nssf;
    std::unique_ptr<Nwdaf> nwdaf;
    std::unique_ptr<Nef> nef;
    std::map<std::string, std::unique_ptr<Amf>> amfs;
    std::map<std::string, AmfConfig> amf_configs;
    std::unique_ptr<Smf> smf;
    SmfConfig smf_config;
    std::string smf_id;
    std::unique_ptr<Upf> upf;
    std::string upf_id;
    std::unique_ptr<N3iwf> n3iwf;
    std::string n3iwf_id;

    std::map<std::string, std::unique_ptr<EmGnb>> gnbs;
    std::map<std::string, std::unique_ptr<EmUe>> ues;  // by supi

    std::unique_ptr<lorawan::LoraRadio> radio;
    std::unique_ptr<lorawan::JoinServer> join_server;
    std::unique_ptr<lorawan::AppServer> app_server;
    std::unique_ptr<lorawan::NetworkServer> network_server;
    std::unique_ptr<LorawanDnBridge> dn_bridge;
    std::map<std::string, std::unique_ptr<lorawan::LoraGateway>> gateways;
    std::map<std::string, std::unique_ptr<NonTgppPeer>> gateway_hosts;  // by gateway id
    std::map<std::string, lorawan::DeviceIdentity> device_identities;   // by dev_eui hex
    std::map<std::string, std::unique_ptr<lorawan::LoraDevice>> devices;

    struct DnCapture {
        bool echo = false;
        std::vector<std::pair<uint32_t, Bytes>> packets;
    };
    std::map<std::string, DnCapture> dn;

    struct Agent {
        NfProfile profile;
        bool alive = true;
        std::function<int()> load_hint;
    };
    std::map<std::string, Agent> agents;

    std::string error;  // first build error

    explicit Runtime(const Json& d, std::string base, RunOptions opts)
        : doc(d), base_dir(std::move(base)), options(opts) {}

    // ---- construction ----------------------------------------------------
    bool build();
    void start_agent(const std::string& id, NfType type, std::vector<std::string> services,
                     std::vector<Snssai> snssais, std::function<int()> load_hint);
    void schedule_heartbeat(const std::string& id);
    void wire_gateway_host(const std::string& gw_id, const Json& gw_cfg);

    // ---- execution -------------------------------------------------------
    void schedule_events();
    void execute(const Json& event);
    SimTime horizon() const;
    void run_to_horizon();

    // ---- evaluation ------------------------------------------------------
    void collect_metrics();
    AssertionResult evaluate(const Json& assertion);
};

void Runtime::start_agent(const std::string& id, NfType type, std::vector<std::string> services,
                          std::vector<Snssai> snssais, std::function<int()> load_hint) {
    NfProfile profile;
    profile.instance_id = id;
    profile.nf_type = type;
    profile.services = std::move(services);
    profile.snssais = std::move(snssais);
    nrf_client::register_nf(ctx, id, profile);
    agents[id] = Agent{profile, true, std::move(load_hint)};
    schedule_heartbeat(id);
}

void Runtime::schedule_heartbeat(const std::string& id) {
    auto it = agents.find(id);
    if (it == agents.end() || !it->second.alive) return;
    clock->schedule_after(it->second.profile.heartbeat_period, [this, id] {
        auto a = agents.find(id);
        if (a == agents.end() || !a->second.alive) return;
        int load = a->second.load_hint ? a->second.load_hint() : 0;
        nrf_client::send_heartbeat(ctx, id, load);
        bus->publish(Json{{"core_event", true},
                          {"kind", "NfLoadSample"},
                          {"t", clock->now()},
                          {"payload", Json{{"nf", id}, {"value", double(load)}}}});
        schedule_heartbeat(id);
    });
}

bool Runtime::build() {
    uint64_t seed = options.seed_override.value_or(doc.value("seed", uint64_t{1}));
    rng = std::make_unique<Rng>(seed);

    if (options.mode == RunMode::Deterministic) {
        sim_clock = std::make_unique<SimClock>();
        clock = sim_clock.get();
    } else {
        rt_clock = std::make_unique<RealtimeClock>(options.time_scale);
        clock = rt_clock.get();
    }
    if (options.mode == RunMode::Deterministic) {
        bus = std::make_unique<LoopbackBus>(clock, &trace);
        fabric = std::make_unique<UserPlaneFabric>();
    } else {
        bus = std::make_unique<HttpBus>(clock, &trace);
        fabric = std::make_unique<TcpUserPlaneFabric>();
    }

    const Json topo = doc.value("topology", Json::object());
    if (topo.value("deployment", Json::object()).value("smf_upf", "separated") == "combined") {
        // co-deployed control and user plane: Sx stays process-internal
        bus->mark_internal_prefix("/sx/v1");
        bus->mark_internal_prefix("/nsmf-pdusession/v1/sx-reports");
    }
    std::string nrf_id = topo.value("nrf", "nrf-1");
    ctx = RunContext{clock, rng.get(), bus.get(), &metrics, &nas_log, nrf_id};

    nrf = std::make_unique<Nrf>(ctx, nrf_id);
    store = std::make_shared<SubscriberStore>();
    std::string sub_err;
    Json subscribers = load_ref_or_inline(doc.value("subscribers", Json::array()), base_dir, &sub_err);
    if (!sub_err.empty()) {
        error = sub_err;
        return false;
    }
    try {
        store->load_provisioning(subscribers);
    } catch (const std::exception& e) {
        error = std::string("subscribers: ") + e.what();
        return false;
    }

    std::string udm_id = topo.value("udm", "udm-1");
    std::string udr_id = topo.value("udr", "udr-1");
    std::string ausf_id = topo.value("ausf", "ausf-1");
    std::string udsf_id = topo.value("udsf", "udsf-1");
    udm = std::make_unique<Udm>(ctx, udm_id, store);
    udr = std::make_unique<Udr>(ctx, udr_id, store);
    ausf = std::make_unique<Ausf>(ctx, ausf_id, udm_id);
    udsf = std::make_unique<Udsf>(ctx, udsf_id);
    start_agent(udm_id, NfType::UDM, {"nudm-sdm", "nudm-uecm"}, {}, nullptr);
    start_agent(ausf_id, NfType::AUSF, {"nausf-auth"}, {}, nullptr);

    Json pcf_topo = topo.value("pcf", Json::object());
    std::string pcf_id = pcf_topo.value("id", "pcf-1");
    try {
        pcf = std::make_unique<Pcf>(ctx, pcf_id, PcfConfig::from_json(pcf_topo.value("config", Json::object())));
    } catch (const std::exception& e) {
        error = std::string("pcf config: ") + e.what();
        return false;
    }
    start_agent(pcf_id, NfType::PCF, {"npcf-sm-policy", "npcf-am-policy", "npcf-bdt"}, {}, nullptr);

    Json nssf_topo = topo.value("nssf", Json::object());
    std::string nssf_id = nssf_topo.value("id", "nssf-1");
    nssf = std::make_unique<Nssf>(ctx, nssf_id);
    start_agent(nssf_id, NfType::NSSF, {"nnssf-nsselection"}, {}, nullptr);

    if (topo.contains("nwdaf")) {
        nwdaf = std::make_unique<Nwdaf>(ctx, topo.value("nwdaf", "nwdaf-1"));
        start_agent(nwdaf->id(), NfType::NWDAF, {"nnwdaf-analytics"}, {}, nullptr);
    }
    if (topo.contains("nef")) {
        std::vector<AfProfile> afs;
        for (const auto& af : topo["nef"].value("afs", Json::array()))
            afs.push_back(AfProfile{af.value("id", "af-1"),
                                    af.value("trust", "Low") == "High" ? AfTrust::High
                                                                       : AfTrust::Low});
        nef = std::make_unique<Nef>(ctx, topo["nef"].value("id", "nef-1"), afs);
        start_agent(nef->id(), NfType::NEF, {"nnef-event-exposure"}, {}, nullptr);
    }

    // AMFs
    std::vector<std::string> amf_ids;
    for (const auto& amf_topo : topo.value("amfs", Json::array())) {
        std::string id = amf_topo.value("id", "amf-1");
        AmfConfig cfg;
        cfg.ausf = ausf_id;
        cfg.udm = udm_id;
        cfg.udsf = udsf_id;
        cfg.pcf = pcf_id;
        cfg.nssf = nssf_id;
        if (amf_topo.contains("periodic_update_period_s"))
            cfg.periodic_update_period =
                seconds_to_sim(amf_topo["periodic_update_period_s"].get<double>());
        if (amf_topo.contains("paging_timeout_s"))
            cfg.paging_timeout = seconds_to_sim(amf_topo["paging_timeout_s"].get<double>());
        amf_configs[id] = cfg;
        amfs[id] = std::make_unique<Amf>(ctx, id, cfg);
        Amf* raw = amfs[id].get();
        start_agent(id, NfType::AMF, {"namf-comm"}, {}, [this, id] {
            auto it = amfs.find(id);
            return it == amfs.end() ? 0 : it->second->load_hint();
        });
        amf_ids.push_back(id);
        (void)raw;
    }

    // slice catalog: explicit entries, or every subscriber slice on all AMFs
    if (nssf_topo.contains("slices")) {
        for (const auto& s : nssf_topo["slices"]) {
            nssf->availability_update(Snssai::parse(s.at("snssai").get<std::string>()),
                                      s.value("available", true),
                                      s.value("amfs", amf_ids));
        }
    } else {
        std::set<std::string> slices;
        for (const auto& rec : subscribers)
            for (const auto& s : rec.value("allowed_snssais", Json::array()))
                slices.insert(s.get<std::string>());
        for (const auto& s : slices)
            nssf->availability_update(Snssai::parse(s), true, amf_ids);
    }

    // session plane
    if (topo.contains("upf")) {
        upf_id = topo["upf"].value("id", "upf-1");
        upf = std::make_unique<Upf>(ctx, upf_id, fabric.get());
        start_agent(upf_id, NfType::UPF, {}, {}, [this] {
            return upf ? int(std::min<size_t>(upf->session_count(), 100)) : 0;
        });
        for (const auto& [dnn, mode] :
             topo["upf"].value("dns", std::map<std::string, std::string>{}) ) {
            dn[dnn].echo = mode == "echo";
            std::string dnn_copy = dnn;
            upf->attach_dn(dnn, [this, dnn_copy](uint32_t ue_ip, const Bytes& payload) {
                auto& capture = dn[dnn_copy];
                capture.packets.emplace_back(ue_ip, payload);
                if (capture.echo) upf->inject_downlink(ue_ip, payload);
            });
        }
    }
    if (topo.contains("smf")) {
        smf_id = topo["smf"].value("id", "smf-1");
        smf_config.udm = udm_id;
        smf_config.pcf = pcf_id;
        smf_config.udsf = udsf_id;
        for (const auto& [dnn, cidr] :
             topo["smf"].value("dnn_pools", std::map<std::string, std::string>{}))
            smf_config.dnn_pools[dnn] = cidr;
        try {
            smf = std::make_unique<Smf>(ctx, smf_id, smf_config);
        } catch (const std::exception& e) {
            error = std::string("smf: ") + e.what();
            return false;
        }
        start_agent(smf_id, NfType::SMF, {"nsmf-pdusession"}, {}, [this] {
            return smf ? int(std::min<size_t>(smf->active_sessions(), 100)) : 0;
        });
    }

    if (topo.contains("n3iwf")) {
        n3iwf_id = topo["n3iwf"].value("id", "n3iwf-1");
        N3iwfConfig cfg;
        if (topo["n3iwf"].contains("default_snssai"))
            cfg.default_snssai = Snssai::parse(topo["n3iwf"]["default_snssai"].get<std::string>());
        n3iwf = std::make_unique<N3iwf>(ctx, n3iwf_id, cfg, fabric.get());
        start_agent(n3iwf_id, NfType::N3IWF, {}, {}, nullptr);
    }

    // RAN
    for (const auto& gnb_topo : topo.value("gnbs", Json::array())) {
        std::string id = gnb_topo.value("id", "gnb-1");
        std::vector<CellConfig> cells;
        for (const auto& c : gnb_topo.value("cells", Json::array())) {
            CellConfig cell;
            cell.cell_id = c.value("cell_id", "c1");
            cell.center = {c.at("center")[0].get<double>(), c.at("center")[1].get<double>()};
            cell.radius_m = c.value("radius_m", 500.0);
            cells.push_back(cell);
        }
        gnbs[id] = std::make_unique<EmGnb>(ctx, id, gnb_topo.value("amf", amf_ids.empty() ? "amf-1" : amf_ids[0]),
                                           cells, fabric.get());
    }
    for (const auto& ue_topo : topo.value("ues", Json::array())) {
        std::string supi = ue_topo.at("supi").get<std::string>();
        const SubscriberRecord* rec = store->find(supi);
        if (!rec) {
            error = "ue " + supi + " has no subscriber record";
            return false;
        }
        std::vector<Snssai> requested;
        for (const auto& s : ue_topo.value("requested_nssai", Json::array()))
            requested.push_back(Snssai::parse(s.get<std::string>()));
        if (requested.empty()) requested = rec->allowed_snssais;
        Point pos{0, 0};
        if (ue_topo.contains("position"))
            pos = {ue_topo["position"][0].get<double>(), ue_topo["position"][1].get<double>()};
        ues[supi] = std::make_unique<EmUe>(ctx, Supi::parse(supi), rec->long_term_key, pos,
                                           requested);
    }

    // LoRaWAN access network
    if (doc.contains("lorawan")) {
        const Json& lw = doc["lorawan"];
        radio = std::make_unique<lorawan::LoraRadio>(clock, rng.get());
        join_server = std::make_unique<lorawan::JoinServer>(rng.get());
        app_server = std::make_unique<lorawan::AppServer>(join_server.get());
        network_server = std::make_unique<lorawan::NetworkServer>(
            clock, join_server.get(), app_server.get(),
            seconds_to_sim(lw.value("dedup_window_s", 0.2)));
        if (upf) dn_bridge = std::make_unique<LorawanDnBridge>(upf.get(), network_server.get(),
                                                               lw.value("dnn", "lorawan"));

        std::string dev_err;
        Json devices_doc = load_ref_or_inline(lw.value("devices", Json::array()), base_dir, &dev_err);
        if (!dev_err.empty()) {
            error = dev_err;
            return false;
        }
        for (const auto& dj : devices_doc) {
            auto identity = lorawan::DeviceIdentity::from_json(dj);
            std::string eui = to_hex(identity.dev_eui);
            device_identities[eui] = identity;
            join_server->provision(identity);
            lorawan::RadioParams params;
            params.sf = dj.value("sf", 7);
            params.bw_hz = dj.value("bw_hz", 125000);
            devices[eui] = std::make_unique<lorawan::LoraDevice>(clock, rng.get(), radio.get(),
                                                                 identity, params);
            if (identity.activation == lorawan::Activation::ABP && dj.contains("abp")) {
                lorawan::SessionKeys keys;
                keys.dev_addr = from_hex(dj["abp"].at("dev_addr_hex").get<std::string>());
                keys.nwk_s_key = from_hex(dj["abp"].at("nwk_s_key_hex").get<std::string>());
                keys.app_s_key = from_hex(dj["abp"].at("app_s_key_hex").get<std::string>());
                devices[eui]->activate_abp(keys);
                network_server->activate_abp(identity, keys);
            }
        }
        for (const auto& gj : lw.value("gateways", Json::array())) {
            std::string gw_id = gj.at("id").get<std::string>();
            gateways[gw_id] = std::make_unique<lorawan::LoraGateway>(
                clock, rng.get(), radio.get(), gw_id, lorawan::RadioParams{});
            for (const auto& link : gj.value("links", Json::array())) {
                radio->add_link(from_hex(link.at("dev_eui_hex").get<std::string>()), gw_id,
                                link.value("rssi", -90.0), link.value("noise", 0.0));
            }
            if (gj.contains("host_supi") && n3iwf) {
                wire_gateway_host(gw_id, gj);
            } else {
                // bench topology: gateway wired straight to the network server
                auto* gw = gateways[gw_id].get();
                gw->set_backhaul([this](const Json& d) {
                    network_server->handle_uplink_doc(d);
                    return true;
                });
                network_server->set_gateway_path(
                    gw_id, [gw](const Json& d) { gw->on_downlink_doc(d); });
            }
        }
    }
    return true;
}

void Runtime::wire_gateway_host(const std::string& gw_id, const Json& gw_cfg) {
    std::string supi = gw_cfg.at("host_supi").get<std::string>();
    const SubscriberRecord* rec = store->find(supi);
    if (!rec) {
        error = "gateway host " + supi + " has no subscriber record";
        return;
    }
    NonTgppPeer::Config cfg;
    cfg.peer_id = gw_id + "-host";
    cfg.supi = Supi::parse(supi);
    cfg.long_term_key = rec->long_term_key;
    cfg.requested_nssai = rec->allowed_snssais;
    cfg.dnn = Dnn::make(gw_cfg.value("dnn", doc["lorawan"].value("dnn", "lorawan")));
    cfg.snssai = rec->allowed_snssais.empty() ? Snssai{1, 1} : rec->allowed_snssais.front();

    auto peer = std::make_unique<NonTgppPeer>(
        ctx, cfg, [this, peer_id = cfg.peer_id](const Bytes& wire) {
            if (n3iwf) n3iwf->on_y2_frame(peer_id, wire);
        });
    NonTgppPeer* raw = peer.get();
    n3iwf->connect_peer(cfg.peer_id, [raw](const Bytes& wire) { raw->on_y2_frame(wire); });

    lorawan::LoraGateway* gw = gateways[gw_id].get();
    raw->on_doc = [gw](const Json& d) {
        if (d.value("type", "") == "downlink") gw->on_downlink_doc(d);
    };
    raw->on_ready = [raw, gw] {
        gw->set_backhaul([raw](const Json& d) { return raw->send_doc(d); });
    };
    gateway_hosts[gw_id] = std::move(peer);
}

SimTime Runtime::horizon() const {
    if (doc.contains("duration_s")) return seconds_to_sim(doc["duration_s"].get<double>());
    SimTime last = 0;
    for (const auto& e : doc.value("events", Json::array()))
        last = std::max(last, seconds_to_sim(e.value("t", 0.0)));
    return last + sim_sec(2);
}

void Runtime::schedule_events() {
    for (const auto& event : doc.value("events", Json::array())) {
        SimTime at = seconds_to_sim(event.value("t", 0.0));
        Json ev = event;
        clock->schedule_at(at, [this, ev] { execute(ev); });
    }
}

void Runtime::execute(const Json& event) {
    std::string action = event.value("action", "");
    auto payload_bytes = [&]() -> Bytes {
        if (event.contains("payload_hex")) return from_hex(event["payload_hex"].get<std::string>());
        return to_bytes(event.value("payload_text", ""));
    };

    if (action == "ue_attach") {
        auto& ue = ues.at(event.at("ue").get<std::string>());
        auto& gnb = gnbs.at(event.at("gnb").get<std::string>());
        ue->attach(gnb.get());
    } else if (action == "ue_establish_session") {
        auto& ue = ues.at(event.at("ue").get<std::string>());
        ue->establish_session(event.value("dnn", "internet"),
                              Snssai::parse(event.value("snssai", "1-000001")));
    } else if (action == "ue_release_session") {
        ues.at(event.at("ue").get<std::string>())->release_session(event.value("session_id", 1));
    } else if (action == "ue_send") {
        auto& ue = ues.at(event.at("ue").get<std::string>());
        Bytes payload = payload_bytes();
        int count = event.value("count", 1);
        for (int i = 0; i < count; ++i) ue->send(event.value("session_id", 1), payload);
    } else if (action == "ue_move") {
        ues.at(event.at("ue").get<std::string>())
            ->move({event.at("position")[0].get<double>(), event.at("position")[1].get<double>()});
    } else if (action == "ue_idle") {
        ues.at(event.at("ue").get<std::string>())->go_idle();
    } else if (action == "ue_periodic_update") {
        ues.at(event.at("ue").get<std::string>())->send_periodic_update();
    } else if (action == "ue_service_request") {
        ues.at(event.at("ue").get<std::string>())->send_service_request();
    } else if (action == "ue_deregister") {
        ues.at(event.at("ue").get<std::string>())->deregister();
    } else if (action == "dn_downlink") {
        if (!upf) return;
        uint32_t ue_ip = 0;
        if (event.contains("ue_ip")) {
            ue_ip = ipv4_from_string(event["ue_ip"].get<std::string>());
        } else if (smf) {
            const PduSession* s = smf->find_session(event.at("ue").get<std::string>(),
                                                    event.value("session_id", 1));
            if (!s) return;
            ue_ip = s->ue_ip;
        }
        Bytes payload = payload_bytes();
        int count = event.value("count", 1);
        for (int i = 0; i < count; ++i) upf->inject_downlink(ue_ip, payload);
    } else if (action == "page") {
        std::string supi = event.at("supi").get<std::string>();
        for (auto& [id, amf] : amfs) {
            SbiRequest req;
            req.src = "scenario";
            req.target = id;
            req.method = SbiMethod::Post;
            req.uri = "/namf-comm/v1/ue-contexts/" + supi + "/paging-trigger";
            if (bus->invoke(std::move(req)).ok()) break;
        }
    } else if (action == "kill_nf") {
        std::string id = event.at("id").get<std::string>();
        if (auto it = amfs.find(id); it != amfs.end()) {
            it->second->shutdown();
            amfs.erase(it);
        } else if (id == smf_id) {
            smf.reset();
        }
        if (auto a = agents.find(id); a != agents.end()) a->second.alive = false;
    } else if (action == "restart_nf") {
        std::string id = event.at("id").get<std::string>();
        if (amf_configs.count(id) && !amfs.count(id)) {
            amfs[id] = std::make_unique<Amf>(ctx, id, amf_configs[id]);
        } else if (id == smf_id && !smf) {
            smf = std::make_unique<Smf>(ctx, smf_id, smf_config, /*recover=*/true);
        }
        if (auto a = agents.find(id); a != agents.end()) {
            a->second.alive = true;
            nrf_client::reregister_nf(ctx, id, a->second.profile);
            schedule_heartbeat(id);
        }
        metrics.add("scenario.restarts");
    } else if (action == "gw_attach") {
        auto it = gateway_hosts.find(event.at("gateway").get<std::string>());
        if (it != gateway_hosts.end()) it->second->attach();
    } else if (action == "gw_detach") {
        auto it = gateways.find(event.at("gateway").get<std::string>());
        if (it != gateways.end()) it->second->clear_backhaul();
    } else if (action == "lora_join") {
        devices.at(event.at("device").get<std::string>())->start_join();
    } else if (action == "lora_uplink") {
        auto& dev = devices.at(event.at("device").get<std::string>());
        Bytes payload = payload_bytes();
        int count = event.value("count", 1);
        for (int i = 0; i < count; ++i) dev->send_uplink(payload, event.value("confirmed", false));
    } else if (action == "lora_replay") {
        devices.at(event.at("device").get<std::string>())->retransmit_last();
    } else if (action == "lora_abp_activate") {
        auto& dev = devices.at(event.at("device").get<std::string>());
        lorawan::SessionKeys keys;
        keys.dev_addr = from_hex(event.at("dev_addr_hex").get<std::string>());
        keys.nwk_s_key = from_hex(event.at("nwk_s_key_hex").get<std::string>());
        keys.app_s_key = from_hex(event.at("app_s_key_hex").get<std::string>());
        dev->activate_abp(keys);
        network_server->activate_abp(dev->identity(), keys);
    } else if (action == "nwdaf_ingest") {
        if (nwdaf) nwdaf->ingest(event.at("event"));
    } else if (action == "bdt_request") {
        if (!pcf) return;
        SbiRequest req;
        req.src = "scenario";
        req.target = pcf->id();
        req.method = SbiMethod::Post;
        req.uri = "/npcf-bdt/v1/windows";
        req.body = Json{{"bytes", event.at("bytes").get<int64_t>()},
                        {"earliest_us", seconds_to_sim(event.value("earliest_s", 0.0))},
                        {"latest_us", seconds_to_sim(event.value("latest_s", 0.0))}};
        auto out = bus->invoke(std::move(req));
        metrics.set("bdt.feasible", out.ok() ? 1 : 0);
        if (out.ok()) {
            metrics.set("bdt.start_us", int64_t(out.response.body.value("start_us", SimTime{0})));
            metrics.set("bdt.end_us", int64_t(out.response.body.value("end_us", SimTime{0})));
        }
    } else if (action == "nssf_update") {
        nssf->availability_update(Snssai::parse(event.at("snssai").get<std::string>()),
                                  event.value("available", true),
                                  event.value("amfs", std::vector<std::string>{}));
    }
}

void Runtime::run_to_horizon() {
    SimTime end = horizon();
    if (sim_clock) {
        sim_clock->advance_to(end);
    } else {
        while (clock->now() < end)
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    for (auto& [id, agent] : agents) agent.alive = false;
    // no callback may fire while the runtime tears down
    if (rt_clock) rt_clock->stop();
}

void Runtime::collect_metrics() {
    if (upf) metrics.set("upf.buffered_now", int64_t(upf->total_buffered()));
    if (smf) metrics.set("smf.active_sessions", int64_t(smf->active_sessions()));
    if (network_server) {
        metrics.set("lora.upstream_deliveries", int64_t(network_server->upstream_deliveries()));
        metrics.set("lora.duplicates_eliminated",
                    int64_t(network_server->duplicates_eliminated()));
        metrics.set("lora.replays_rejected", int64_t(network_server->replays_rejected()));
        metrics.set("lora.security_events", int64_t(network_server->security_events()));
    }
    if (app_server) metrics.set("lora.app_deliveries", int64_t(app_server->deliveries().size()));
    for (auto& [id, gw] : gateways) {
        metrics.set("lora.gateway." + id + ".dropped", int64_t(gw->dropped_frames()));
        metrics.set("lora.gateway." + id + ".buffered", int64_t(gw->buffered()));
    }
    for (auto& [dnn, capture] : dn)
        metrics.set("dn." + dnn + ".received", int64_t(capture.packets.size()));
    if (n3iwf) metrics.set("n3iwf.integrity_drops", int64_t(n3iwf->integrity_drops()));
    metrics.set("trace.entries", int64_t(trace.size()));
}

AssertionResult Runtime::evaluate(const Json& assertion) {
    AssertionResult result;
    result.name = assertion.value("name", assertion.value("kind", "assertion"));
    std::string kind = assertion.value("kind", "");
    auto fail = [&](const std::string& detail) {
        result.pass = false;
        result.detail = detail;
        return result;
    };
    auto pass = [&]() {
        result.pass = true;
        return result;
    };

    try {
        if (kind == "registered") {
            std::string supi = assertion.at("supi").get<std::string>();
            bool expect = assertion.value("expect", true);
            bool actual = false;
            for (auto& [id, amf] : amfs) {
                auto ctx_opt = amf->context(supi);
                if (ctx_opt && ctx_opt->rm == RmState::Registered) actual = true;
            }
            return actual == expect ? pass() : fail("registered=" + std::to_string(actual));
        }
        if (kind == "cm_state") {
            std::string supi = assertion.at("supi").get<std::string>();
            std::string expect = assertion.value("expect", "Connected");
            for (auto& [id, amf] : amfs) {
                auto ctx_opt = amf->context(supi);
                if (ctx_opt) {
                    std::string actual = to_string(ctx_opt->cm);
                    return actual == expect ? pass() : fail("cm=" + actual);
                }
            }
            return fail("no context");
        }
        if (kind == "nas_kinds") {
            auto kinds = nas_log.kinds_for(assertion.at("supi").get<std::string>());
            std::vector<std::string> expect =
                assertion.at("expect").get<std::vector<std::string>>();
            if (kinds == expect) return pass();
            std::string got;
            for (const auto& k : kinds) got += k + " ";
            return fail("got: " + got);
        }
        if (kind == "nas_parity") {
            auto a = nas_log.kinds_for(assertion.at("supi_a").get<std::string>());
            auto b = nas_log.kinds_for(assertion.at("supi_b").get<std::string>());
            size_t n = assertion.value("prefix_len", 0);
            if (n > 0) {
                if (a.size() < n || b.size() < n) return fail("too few NAS messages");
                a.resize(n);
                b.resize(n);
            }
            return a == b ? pass() : fail("sequences differ");
        }
        if (kind == "session_ip") {
            if (!smf) return fail("no smf");
            const PduSession* s = smf->find_session(assertion.at("supi").get<std::string>(),
                                                    assertion.value("session_id", 1));
            if (!s) return fail("no session");
            std::string actual = ipv4_to_string(s->ue_ip);
            return actual == assertion.at("expect").get<std::string>() ? pass()
                                                                       : fail("ip=" + actual);
        }
        if (kind == "metric") {
            int64_t value = metrics.get(assertion.at("key").get<std::string>());
            if (assertion.contains("expect"))
                return value == assertion["expect"].get<int64_t>()
                           ? pass()
                           : fail("value=" + std::to_string(value));
            if (assertion.contains("min") && value < assertion["min"].get<int64_t>())
                return fail("value=" + std::to_string(value));
            if (assertion.contains("max") && value > assertion["max"].get<int64_t>())
                return fail("value=" + std::to_string(value));
            return pass();
        }
        if (kind == "conservation") {
            int64_t injected = assertion.contains("injected")
                                   ? assertion["injected"].get<int64_t>()
                                   : metrics.get("upf.injected");
            int64_t total = metrics.get("upf.forwarded") + metrics.get("upf.dropped") +
                            int64_t(upf ? upf->total_buffered() : 0);
            if (metrics.get("upf.injected") != injected)
                return fail("injected=" + std::to_string(metrics.get("upf.injected")));
            return total == injected
                       ? pass()
                       : fail("forwarded+dropped+buffered=" + std::to_string(total));
        }
        if (kind == "sbi_clean") {
            std::string sentinel_hex = assertion.at("sentinel_hex").get<std::string>();
            Bytes sentinel = from_hex(sentinel_hex);
            std::vector<std::string> needles = {sentinel_hex, to_base64(sentinel),
                                                to_string(sentinel)};
            for (const auto& e : trace.snapshot()) {
                for (const auto& needle : needles) {
                    if (needle.empty()) continue;
                    if (e.request_body.find(needle) != std::string::npos ||
                        e.response_body.find(needle) != std::string::npos)
                        return fail("sentinel found in " + e.uri);
                }
            }
            return pass();
        }
        if (kind == "dn_count") {
            auto it = dn.find(assertion.at("dnn").get<std::string>());
            int64_t actual = it == dn.end() ? 0 : int64_t(it->second.packets.size());
            return actual == assertion.at("expect").get<int64_t>()
                       ? pass()
                       : fail("count=" + std::to_string(actual));
        }
        if (kind == "dn_payload") {
            auto it = dn.find(assertion.at("dnn").get<std::string>());
            size_t index = assertion.value("index", 0);
            if (it == dn.end() || index >= it->second.packets.size()) return fail("no packet");
            Bytes expect = assertion.contains("expect_hex")
                               ? from_hex(assertion["expect_hex"].get<std::string>())
                               : to_bytes(assertion.value("expect_text", ""));
            return it->second.packets[index].second == expect ? pass() : fail("payload differs");
        }
        if (kind == "ue_received") {
            auto& ue = ues.at(assertion.at("ue").get<std::string>());
            int64_t actual = int64_t(ue->received().size());
            return actual == assertion.at("expect").get<int64_t>()
                       ? pass()
                       : fail("received=" + std::to_string(actual));
        }
        if (kind == "app_deliveries") {
            int64_t actual = app_server ? int64_t(app_server->deliveries().size()) : 0;
            return actual == assertion.at("expect").get<int64_t>()
                       ? pass()
                       : fail("deliveries=" + std::to_string(actual));
        }
        if (kind == "app_payload") {
            if (!app_server) return fail("no app server");
            size_t index = assertion.value("index", 0);
            if (index >= app_server->deliveries().size()) return fail("no delivery");
            Bytes expect = assertion.contains("expect_hex")
                               ? from_hex(assertion["expect_hex"].get<std::string>())
                               : to_bytes(assertion.value("expect_text", ""));
            return app_server->deliveries()[index].plaintext == expect ? pass()
                                                                       : fail("plaintext differs");
        }
        if (kind == "upstream_unique") {
            int64_t actual = network_server ? int64_t(network_server->upstream_deliveries()) : 0;
            return actual == assertion.at("expect").get<int64_t>()
                       ? pass()
                       : fail("deliveries=" + std::to_string(actual));
        }
        if (kind == "lora_joined") {
            auto& dev = devices.at(assertion.at("device").get<std::string>());
            bool expect = assertion.value("expect", true);
            return dev->joined() == expect ? pass() : fail("joined=" + std::to_string(dev->joined()));
        }
        if (kind == "ue_error") {
            auto& ue = ues.at(assertion.at("ue").get<std::string>());
            std::string expect = assertion.at("expect").get<std::string>();
            return ue->last_error() == expect ? pass() : fail("error=" + ue->last_error());
        }
        if (kind == "gw_ready") {
            auto it = gateway_hosts.find(assertion.at("gateway").get<std::string>());
            bool actual = it != gateway_hosts.end() && it->second->ready();
            return actual == assertion.value("expect", true)
                       ? pass()
                       : fail(it == gateway_hosts.end() ? "no host"
                                                        : "error=" + it->second->last_error());
        }
        if (kind == "bdt_result") {
            if (assertion.contains("feasible") &&
                metrics.get("bdt.feasible") != (assertion["feasible"].get<bool>() ? 1 : 0))
                return fail("feasible=" + std::to_string(metrics.get("bdt.feasible")));
            if (assertion.contains("start_s") &&
                metrics.get("bdt.start_us") !=
                    int64_t(seconds_to_sim(assertion["start_s"].get<double>())))
                return fail("start_us=" + std::to_string(metrics.get("bdt.start_us")));
            return pass();
        }
    } catch (const std::exception& e) {
        return fail(std::string("assertion error: ") + e.what());
    }
    return fail("unknown assertion kind: " + kind);
}

}  // namespace

Scenario Scenario::from_json(Json doc, std::string base_dir) {
    Scenario s;
    s.doc_ = std::move(doc);
    s.base_dir_ = std::move(base_dir);
    return s;
}

Scenario Scenario::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open scenario file: " + path);
    Json doc = Json::parse(f);
    size_t slash = path.find_last_of('/');
    return from_json(std::move(doc), slash == std::string::npos ? "." : path.substr(0, slash));
}

std::vector<ValidationIssue> Scenario::validate() const {
    std::vector<ValidationIssue> issues;
    auto err = [&](const std::string& where, const std::string& message) {
        issues.push_back(ValidationIssue{where, message, false});
    };
    auto warn = [&](const std::string& where, const std::string& message) {
        issues.push_back(ValidationIssue{where, message, true});
    };

    const Json topo = doc_.value("topology", Json::object());
    std::set<std::string> ue_ids, gnb_ids, device_ids, gateway_ids, nf_ids;
    nf_ids.insert(topo.value("nrf", "nrf-1"));
    for (const auto& a : topo.value("amfs", Json::array())) nf_ids.insert(a.value("id", "amf-1"));
    if (topo.contains("smf")) nf_ids.insert(topo["smf"].value("id", "smf-1"));
    if (topo.contains("upf")) nf_ids.insert(topo["upf"].value("id", "upf-1"));
    for (const auto& g : topo.value("gnbs", Json::array())) gnb_ids.insert(g.value("id", "gnb-1"));
    for (const auto& u : topo.value("ues", Json::array())) {
        if (!u.contains("supi")) {
            err("/topology/ues", "ue without supi");
            continue;
        }
        ue_ids.insert(u["supi"].get<std::string>());
    }

    std::string ref_err;
    Json subscribers =
        load_ref_or_inline(doc_.value("subscribers", Json::array()), base_dir_, &ref_err);
    if (!ref_err.empty()) err("/subscribers", ref_err);
    std::set<std::string> subscribed;
    for (const auto& s : subscribers)
        if (s.contains("supi")) subscribed.insert(s["supi"].get<std::string>());
    for (const auto& supi : ue_ids)
        if (!subscribed.count(supi)) err("/topology/ues", "no subscriber record for " + supi);

    if (doc_.contains("lorawan")) {
        Json devices_doc =
            load_ref_or_inline(doc_["lorawan"].value("devices", Json::array()), base_dir_, &ref_err);
        if (!ref_err.empty()) err("/lorawan/devices", ref_err);
        for (const auto& d : devices_doc)
            if (d.contains("dev_eui_hex")) device_ids.insert(d["dev_eui_hex"].get<std::string>());
        for (const auto& g : doc_["lorawan"].value("gateways", Json::array())) {
            if (!g.contains("id")) {
                err("/lorawan/gateways", "gateway without id");
                continue;
            }
            gateway_ids.insert(g["id"].get<std::string>());
            if (g.contains("host_supi") && !subscribed.count(g["host_supi"].get<std::string>()))
                err("/lorawan/gateways", "no subscriber record for " + g["host_supi"].get<std::string>());
        }
    }

    // event script: monotone times, known actions, resolvable references
    double last_t = -1;
    const Json events = doc_.value("events", Json::array());
    for (size_t i = 0; i < events.size(); ++i) {
        std::string where = "/events/" + std::to_string(i);
        const Json& e = events[i];
        double t = e.value("t", 0.0);
        if (t < last_t) err(where, "event times must be non-decreasing");
        last_t = std::max(last_t, t);
        std::string action = e.value("action", "");
        if (!kKnownActions.count(action)) {
            err(where, "unknown action '" + action + "'");
            continue;
        }
        if (e.contains("ue") && !ue_ids.count(e["ue"].get<std::string>()))
            err(where, "unknown ue " + e["ue"].get<std::string>());
        if (e.contains("gnb") && !gnb_ids.count(e["gnb"].get<std::string>()))
            err(where, "unknown gnb " + e["gnb"].get<std::string>());
        if (e.contains("device") && !device_ids.count(e["device"].get<std::string>()))
            err(where, "unknown device " + e["device"].get<std::string>());
        if (e.contains("gateway") && !gateway_ids.count(e["gateway"].get<std::string>()))
            err(where, "unknown gateway " + e["gateway"].get<std::string>());
        if ((action == "kill_nf" || action == "restart_nf") &&
            !nf_ids.count(e.value("id", "")))
            err(where, "unknown nf " + e.value("id", ""));
    }

    const Json assertions = doc_.value("assertions", Json::array());
    for (size_t i = 0; i < assertions.size(); ++i) {
        std::string where = "/assertions/" + std::to_string(i);
        if (!kKnownAssertions.count(assertions[i].value("kind", "")))
            err(where, "unknown assertion kind '" + assertions[i].value("kind", "") + "'");
    }

    // pool pressure: more UEs than any single pool can hold at once
    if (topo.contains("smf")) {
        for (const auto& [dnn, cidr] :
             topo["smf"].value("dnn_pools", std::map<std::string, std::string>{})) {
            try {
                Ipv4Pool pool(cidr);
                if (ue_ids.size() > pool.capacity())
                    warn("/topology/smf/dnn_pools/" + dnn,
                         "pool-pressure: " + std::to_string(ue_ids.size()) + " UEs vs " +
                             std::to_string(pool.capacity()) + " addresses");
            } catch (const std::exception& e) {
                err("/topology/smf/dnn_pools/" + dnn, e.what());
            }
        }
    }
    return issues;
}

RunReport Scenario::run(const RunOptions& options) const {
    RunReport report;
    Runtime runtime(doc_, base_dir_, options);
    try {
        if (!runtime.build()) {
            report.aborted = true;
            report.abort_reason = runtime.error;
            return report;
        }
        runtime.schedule_events();
        runtime.run_to_horizon();
        runtime.collect_metrics();
        for (const auto& a : doc_.value("assertions", Json::array()))
            report.assertions.push_back(runtime.evaluate(a));
    } catch (const std::exception& e) {
        report.aborted = true;
        report.abort_reason = e.what();
        auto entries = runtime.trace.snapshot();
        std::ostringstream tail;
        size_t start = entries.size() > 20 ? entries.size() - 20 : 0;
        for (size_t i = start; i < entries.size(); ++i)
            tail << canonical_json(entries[i].to_json()) << "\n";
        report.abort_reason += "; trace tail:\n" + tail.str();
    }
    report.metrics = runtime.metrics.to_json();
    report.trace_jsonl = runtime.trace.to_jsonl();
    std::ostringstream nas;
    for (const auto& r : runtime.nas_log.snapshot())
        nas << canonical_json(Json{{"t", r.t},
                                   {"supi", r.supi},
                                   {"kind", r.kind},
                                   {"direction", r.direction},
                                   {"access", r.access}})
            << "\n";
    report.nas_jsonl = nas.str();
    return report;
}

}  // namespace sbacore
