/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

// Assembles a full core over the loopback bus for integration-style tests.

#include <memory>

#include "sbacore/amf.hpp"
#include "sbacore/auth_data.hpp"
#include "sbacore/bus.hpp"
#include "sbacore/context.hpp"
#include "sbacore/nrf.hpp"
#include "sbacore/policy.hpp"
#include "sbacore/session.hpp"
#include "sbacore/userplane.hpp"

namespace testing_fixture {

using namespace sbacore;

struct CoreFixture {
    SimClock clock;
    Rng rng{42};
    TraceLog trace;
    Metrics metrics;
    NasLog nas_log;
    std::unique_ptr<LoopbackBus> bus;
    RunContext ctx;

    UserPlaneFabric fabric;
    std::unique_ptr<Nrf> nrf;
    std::shared_ptr<SubscriberStore> store;
    std::unique_ptr<Udm> udm;
    std::unique_ptr<Udr> udr;
    std::unique_ptr<Ausf> ausf;
    std::unique_ptr<Udsf> udsf;
    std::unique_ptr<Pcf> pcf;
    std::unique_ptr<Nssf> nssf;
    std::unique_ptr<Amf> amf;
    std::unique_ptr<Smf> smf;
    std::unique_ptr<Upf> upf;

    explicit CoreFixture(uint64_t seed = 42) : rng(seed) {
        bus = std::make_unique<LoopbackBus>(&clock, &trace);
        ctx = RunContext{&clock, &rng, bus.get(), &metrics, &nas_log, "nrf-1"};

        nrf = std::make_unique<Nrf>(ctx, "nrf-1");
        store = std::make_shared<SubscriberStore>();
        udm = std::make_unique<Udm>(ctx, "udm-1", store);
        udr = std::make_unique<Udr>(ctx, "udr-1", store);
        ausf = std::make_unique<Ausf>(ctx, "ausf-1", "udm-1");
        udsf = std::make_unique<Udsf>(ctx, "udsf-1");
        nssf = std::make_unique<Nssf>(ctx, "nssf-1");
        register_with_nrf("udm-1", NfType::UDM, {"nudm-sdm", "nudm-uecm"});
        register_with_nrf("ausf-1", NfType::AUSF, {"nausf-auth"});
        register_with_nrf("nssf-1", NfType::NSSF, {"nnssf-nsselection"});
    }

    void register_with_nrf(const NfInstanceId& id, NfType type,
                           std::vector<std::string> services = {}) {
        NfProfile p;
        p.instance_id = id;
        p.nf_type = type;
        p.services = std::move(services);
        nrf_client::register_nf(ctx, id, p);
    }

    void add_pcf(const Json& config = Json::object()) {
        pcf = std::make_unique<Pcf>(ctx, "pcf-1", PcfConfig::from_json(config));
        register_with_nrf("pcf-1", NfType::PCF, {"npcf-sm-policy", "npcf-am-policy"});
    }

    AmfConfig amf_config() {
        AmfConfig cfg;
        cfg.ausf = "ausf-1";
        cfg.udm = "udm-1";
        cfg.udsf = "udsf-1";
        cfg.pcf = "pcf-1";
        cfg.nssf = "nssf-1";
        return cfg;
    }

    void add_amf(const std::string& id = "amf-1") {
        amf = std::make_unique<Amf>(ctx, id, amf_config());
        NfProfile p;
        p.instance_id = id;
        p.nf_type = NfType::AMF;
        p.services = {"namf-comm"};
        nrf_client::register_nf(ctx, id, p);
    }

    void add_session_plane(const std::map<std::string, std::string>& pools = {
                               {"internet", "10.60.0.0/24"}}) {
        upf = std::make_unique<Upf>(ctx, "upf-1", &fabric);
        NfProfile up;
        up.instance_id = "upf-1";
        up.nf_type = NfType::UPF;
        nrf_client::register_nf(ctx, "upf-1", up);

        SmfConfig cfg;
        cfg.dnn_pools = pools;
        cfg.udm = "udm-1";
        cfg.pcf = "pcf-1";
        cfg.udsf = "udsf-1";
        smf = std::make_unique<Smf>(ctx, "smf-1", cfg);
        NfProfile sp;
        sp.instance_id = "smf-1";
        sp.nf_type = NfType::SMF;
        sp.services = {"nsmf-pdusession"};
        nrf_client::register_nf(ctx, "smf-1", sp);
    }

    SubscriberRecord provision_subscriber(const std::string& supi_text,
                                          const std::string& key_hex = std::string(32, 'a'),
                                          std::vector<Snssai> slices = {Snssai::make(1, 1)},
                                          std::vector<std::string> dnns = {"internet"}) {
        SubscriberRecord rec;
        rec.supi = Supi::parse(supi_text);
        rec.long_term_key = from_hex(key_hex);
        rec.allowed_snssais = std::move(slices);
        for (const auto& d : dnns) rec.allowed_dnns.push_back(Dnn::make(d));
        store->provision(rec);
        for (const auto& s : rec.allowed_snssais)
            nssf->availability_update(s, true, {"amf-1"});
        return rec;
    }
};

}  // namespace testing_fixture
