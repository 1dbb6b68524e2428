/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/policy.hpp"

#include <algorithm>

#include "sbacore/nrf.hpp"
#include "sbacore/uri.hpp"

namespace sbacore {

Json PccDirectives::to_json() const {
    return Json{{"priority", priority},
                {"max_bitrate_bps", max_bitrate_bps},
                {"charging_tag", charging_tag}};
}

Json AmPolicy::to_json() const {
    Json j{{"rfsp_index", rfsp_index}, {"forbidden", forbidden}};
    if (service_area_restriction) j["service_area_restriction"] = *service_area_restriction;
    return j;
}

namespace {
PccDirectives directives_from_json(const Json& j, const PccDirectives& defaults) {
    PccDirectives d = defaults;
    d.priority = j.value("priority", d.priority);
    d.max_bitrate_bps = j.value("max_bitrate_bps", d.max_bitrate_bps);
    d.charging_tag = j.value("charging_tag", d.charging_tag);
    if (d.priority < 1 || d.priority > 15)
        throw std::invalid_argument("PccDirectives: priority out of 1..15");
    return d;
}
}  // namespace

PcfConfig PcfConfig::from_json(const Json& j) {
    PcfConfig c;
    if (j.contains("sm_default")) c.sm_default = directives_from_json(j.at("sm_default"), {});
    for (const auto& r : j.value("sm_rules", Json::array())) {
        SmPolicyRule rule;
        if (r.contains("dnn")) rule.dnn = Dnn::make(r.at("dnn").get<std::string>());
        if (r.contains("snssai")) rule.snssai = Snssai::parse(r.at("snssai").get<std::string>());
        rule.directives = directives_from_json(r, c.sm_default);
        c.sm_rules.push_back(std::move(rule));
    }
    if (j.contains("am_policies")) {
        for (auto it = j.at("am_policies").begin(); it != j.at("am_policies").end(); ++it) {
            AmPolicy p;
            p.rfsp_index = it.value().value("rfsp_index", 1);
            p.forbidden = it.value().value("forbidden", false);
            if (it.value().contains("service_area_restriction"))
                p.service_area_restriction =
                    it.value().at("service_area_restriction").get<std::vector<std::string>>();
            if (p.rfsp_index < 1 || p.rfsp_index > 256)
                throw std::invalid_argument("AmPolicy: rfsp_index out of 1..256");
            c.am_policies[it.key()] = std::move(p);
        }
    }
    c.bdt_offpeak_rate_bps = j.value("bdt_offpeak_rate_bps", int64_t{1'000'000});
    if (j.contains("ue_policies")) {
        for (auto it = j.at("ue_policies").begin(); it != j.at("ue_policies").end(); ++it)
            c.ue_policies[it.key()] = it.value();
    }
    c.af_allowlist = j.value("af_allowlist", std::vector<std::string>{});
    return c;
}

Pcf::Pcf(RunContext ctx, NfInstanceId id, PcfConfig config)
    : ctx_(std::move(ctx)), id_(std::move(id)), config_(std::move(config)) {
    ctx_.bus->bind(id_, "/npcf-am-policy/v1", [this](const SbiRequest& r) { return handle_am(r); });
    ctx_.bus->bind(id_, "/npcf-sm-policy/v1", [this](const SbiRequest& r) { return handle_sm(r); });
    ctx_.bus->bind(id_, "/npcf-bdt/v1", [this](const SbiRequest& r) { return handle_bdt(r); });
    ctx_.bus->bind(id_, "/npcf-ue-policy/v1", [this](const SbiRequest& r) { return handle_ue(r); });
    ctx_.bus->bind(id_, "/npcf-authorization/v1",
                   [this](const SbiRequest& r) { return handle_authorization(r); });
    ctx_.bus->bind(id_, "/npcf-events/v1", [this](const SbiRequest& r) { return handle_events(r); });
}

Pcf::~Pcf() { ctx_.bus->unbind_all(id_); }

AmPolicy Pcf::am_policy(const std::string& supi) const {
    auto it = config_.am_policies.find(supi);
    if (it != config_.am_policies.end()) return it->second;
    return AmPolicy{};  // default: rfsp 1, no restriction
}

PccDirectives Pcf::sm_policy(const std::string& supi, const Dnn& dnn, const Snssai& snssai) {
    const SmPolicyRule* best = nullptr;
    int best_rank = 0;  // 2 = dnn+snssai, 1 = dnn only
    for (const auto& rule : config_.sm_rules) {
        if (rule.dnn && !(*rule.dnn == dnn)) continue;
        if (rule.snssai && !(*rule.snssai == snssai)) continue;
        int rank = (rule.dnn ? 1 : 0) + (rule.snssai ? 1 : 0);
        if (!rule.dnn) continue;  // snssai-only rules are not part of the table shape
        if (rank > best_rank) {
            best_rank = rank;
            best = &rule;
        }
    }
    PccDirectives result = best ? best->directives : config_.sm_default;
    ctx_.bus->publish(Json{{"source", "pcf"},
                           {"kind", "sm-policy-decision"},
                           {"supi", supi},
                           {"dnn", dnn.to_string()},
                           {"snssai", snssai.to_string()},
                           {"directives", result.to_json()}});
    return result;
}

Json Pcf::ue_policy(const std::string& supi) const {
    auto it = config_.ue_policies.find(supi);
    return it == config_.ue_policies.end() ? Json{{"route_preferences", Json::array()}} : it->second;
}

bool Pcf::authorize_af(const std::string& af_id) const {
    return std::find(config_.af_allowlist.begin(), config_.af_allowlist.end(), af_id) !=
           config_.af_allowlist.end();
}

std::vector<std::pair<SimTime, double>> Pcf::fetch_load_series(SimTime from, SimTime to) {
    std::vector<std::pair<SimTime, double>> samples;
    auto nwdafs = nrf_client::discover(ctx_, id_, NfType::NWDAF);
    if (nwdafs.empty()) return samples;
    SbiRequest req;
    req.src = id_;
    req.target = nwdafs.front().instance_id;
    req.method = SbiMethod::Get;
    req.uri = "/nnwdaf-analytics/v1/load-series?from_us=" + std::to_string(from) +
              "&to_us=" + std::to_string(to);
    auto out = ctx_.bus->invoke(std::move(req));
    if (!out.ok()) return samples;
    for (const auto& s : out.response.body.at("samples"))
        samples.emplace_back(s.at("t").get<SimTime>(), s.at("value").get<double>());
    return samples;
}

std::optional<BdtWindow> Pcf::bdt_window(const BdtRequest& req) {
    if (req.earliest >= req.latest || req.bytes <= 0) return std::nullopt;
    double length_sec =
        static_cast<double>(req.bytes) * 8.0 / static_cast<double>(config_.bdt_offpeak_rate_bps);
    auto length = static_cast<SimDuration>(length_sec * 1e6);
    if (length == 0) length = 1;
    if (length > req.latest - req.earliest) return std::nullopt;

    auto samples = fetch_load_series(req.earliest, req.latest);
    auto mean_load = [&](SimTime start, SimTime end) {
        double sum = 0;
        int n = 0;
        for (const auto& [t, v] : samples) {
            if (t >= start && t < end) {
                sum += v;
                ++n;
            }
        }
        return n == 0 ? 0.0 : sum / n;
    };

    // candidate starts on a 1-minute grid from earliest
    const SimDuration step = sim_sec(60);
    BdtWindow best;
    bool have = false;
    for (SimTime start = req.earliest; start + length <= req.latest; start += step) {
        double m = mean_load(start, start + length);
        if (!have || m < best.mean_load) {
            best = BdtWindow{start, start + length, m};
            have = true;
        }
        if (start > req.latest - length && step > 0) break;
    }
    if (!have) return std::nullopt;
    return best;
}

SbiResponse Pcf::handle_am(const SbiRequest& req) {
    auto segs = split_path(req.uri);  // /npcf-am-policy/v1/{supi}
    if (segs.size() != 3 || req.method != SbiMethod::Get)
        return SbiResponse::fail(400, "bad-uri", req.uri);
    return SbiResponse::ok(am_policy(segs[2]).to_json());
}

SbiResponse Pcf::handle_sm(const SbiRequest& req) {
    // POST /npcf-sm-policy/v1/decisions {supi, dnn, snssai}
    if (req.method != SbiMethod::Post) return SbiResponse::fail(400, "bad-method", "");
    try {
        auto directives = sm_policy(req.body.at("supi").get<std::string>(),
                                    Dnn::make(req.body.at("dnn").get<std::string>()),
                                    Snssai::parse(req.body.at("snssai").get<std::string>()));
        return SbiResponse::ok(directives.to_json(), 201);
    } catch (const std::exception& e) {
        return SbiResponse::fail(400, "bad-request", e.what());
    }
}

SbiResponse Pcf::handle_bdt(const SbiRequest& req) {
    if (req.method != SbiMethod::Post) return SbiResponse::fail(400, "bad-method", "");
    try {
        BdtRequest r;
        r.bytes = req.body.at("bytes").get<int64_t>();
        r.earliest = req.body.at("earliest_us").get<SimTime>();
        r.latest = req.body.at("latest_us").get<SimTime>();
        if (r.earliest >= r.latest) return SbiResponse::fail(400, "bad-window", "earliest >= latest");
        auto window = bdt_window(r);
        if (!window) return SbiResponse::fail(403, "infeasible", "window shorter than transfer");
        return SbiResponse::ok(Json{{"start_us", window->start},
                                    {"end_us", window->end},
                                    {"mean_load", window->mean_load}},
                               201);
    } catch (const std::exception& e) {
        return SbiResponse::fail(400, "bad-request", e.what());
    }
}

SbiResponse Pcf::handle_ue(const SbiRequest& req) {
    auto segs = split_path(req.uri);  // /npcf-ue-policy/v1/{supi}
    if (segs.size() != 3 || req.method != SbiMethod::Get)
        return SbiResponse::fail(400, "bad-uri", req.uri);
    return SbiResponse::ok(ue_policy(segs[2]));
}

SbiResponse Pcf::handle_authorization(const SbiRequest& req) {
    if (req.method != SbiMethod::Post) return SbiResponse::fail(400, "bad-method", "");
    std::string af = req.body.value("af_id", req.src);
    if (!authorize_af(af)) return SbiResponse::fail(403, "af-not-authorized", af);
    return SbiResponse::ok(Json{{"authorized", true}});
}

SbiResponse Pcf::handle_events(const SbiRequest& req) {
    // POST /npcf-events/v1/subscriptions {filter, callback_instance, callback_uri}
    if (req.method != SbiMethod::Post) return SbiResponse::fail(400, "bad-method", "");
    if (!req.body.contains("filter") || !req.body.at("filter").is_object())
        return SbiResponse::fail(400, "invalid-filter", "filter must be an object");
    Json filter = req.body.at("filter");
    filter["source"] = "pcf";
    std::string id = ctx_.bus->create_subscription(
        filter, req.body.value("callback_instance", req.src),
        req.body.at("callback_uri").get<std::string>());
    return SbiResponse::ok(Json{{"subscription_id", id}}, 201);
}

Nssf::Nssf(RunContext ctx, NfInstanceId id) : ctx_(std::move(ctx)), id_(std::move(id)) {
    ctx_.bus->bind(id_, "/nnssf-nsselection/v1",
                   [this](const SbiRequest& r) { return handle_selection(r); });
    ctx_.bus->bind(id_, "/nnssf-nssaiavailability/v1",
                   [this](const SbiRequest& r) { return handle_availability(r); });
}

Nssf::~Nssf() { ctx_.bus->unbind_all(id_); }

SliceSelection Nssf::select(const std::vector<Snssai>& requested,
                            const std::vector<Snssai>& subscribed) const {
    SliceSelection sel;
    for (const auto& s : requested) {
        if (std::find(subscribed.begin(), subscribed.end(), s) == subscribed.end()) continue;
        auto it = catalog_.find(s);
        if (it == catalog_.end() || !it->second.available) continue;
        if (std::find(sel.allowed.begin(), sel.allowed.end(), s) != sel.allowed.end()) continue;
        sel.allowed.push_back(s);
        for (const auto& amf : it->second.candidate_amfs) {
            if (std::find(sel.candidate_amfs.begin(), sel.candidate_amfs.end(), amf) ==
                sel.candidate_amfs.end())
                sel.candidate_amfs.push_back(amf);
        }
    }
    return sel;
}

SbiResponse Nssf::availability_update(const Snssai& snssai, bool available,
                                      std::vector<NfInstanceId> candidate_amfs) {
    if (available && candidate_amfs.empty())
        return SbiResponse::fail(400, "invalid", "available slice needs candidate AMFs");
    catalog_[snssai] = SliceEntry{available, std::move(candidate_amfs)};
    return SbiResponse::ok(Json{{"snssai", snssai.to_string()}, {"available", available}});
}

namespace {
std::vector<Snssai> parse_snssai_list(const std::string& csv) {
    std::vector<Snssai> out;
    size_t start = 0;
    while (start < csv.size()) {
        size_t comma = csv.find(',', start);
        if (comma == std::string::npos) comma = csv.size();
        if (comma > start) out.push_back(Snssai::parse(csv.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}
}  // namespace

SbiResponse Nssf::handle_selection(const SbiRequest& req) {
    if (req.method != SbiMethod::Get) return SbiResponse::fail(400, "bad-method", "");
    auto params = parse_query(req.uri);
    try {
        auto requested = parse_snssai_list(params.count("requested") ? params["requested"] : "");
        auto subscribed = parse_snssai_list(params.count("subscribed") ? params["subscribed"] : "");
        if (requested.empty()) return SbiResponse::fail(400, "bad-request", "requested empty");
        auto sel = select(requested, subscribed);
        if (sel.allowed.empty())
            return SbiResponse::fail(403, "no-allowed-slice", "empty intersection");
        Json allowed = Json::array();
        for (const auto& s : sel.allowed) allowed.push_back(s.to_string());
        return SbiResponse::ok(Json{{"allowed", allowed}, {"candidate_amfs", sel.candidate_amfs}});
    } catch (const std::exception& e) {
        return SbiResponse::fail(400, "bad-request", e.what());
    }
}

SbiResponse Nssf::handle_availability(const SbiRequest& req) {
    auto segs = split_path(req.uri);  // /nnssf-nssaiavailability/v1/slices/{snssai}
    if (segs.size() != 4 || segs[2] != "slices" || req.method != SbiMethod::Put)
        return SbiResponse::fail(400, "bad-uri", req.uri);
    try {
        return availability_update(
            Snssai::parse(segs[3]), req.body.at("available").get<bool>(),
            req.body.value("candidate_amfs", std::vector<NfInstanceId>{}));
    } catch (const std::exception& e) {
        return SbiResponse::fail(400, "bad-request", e.what());
    }
}

namespace policy_client {

AmPolicy fetch_am_policy(RunContext& ctx, const NfInstanceId& self, const NfInstanceId& pcf,
                         const std::string& supi) {
    SbiRequest req;
    req.src = self;
    req.target = pcf;
    req.method = SbiMethod::Get;
    req.uri = "/npcf-am-policy/v1/" + supi;
    auto out = ctx.bus->invoke(std::move(req));
    AmPolicy p;
    if (!out.ok()) return p;
    p.rfsp_index = out.response.body.value("rfsp_index", 1);
    p.forbidden = out.response.body.value("forbidden", false);
    if (out.response.body.contains("service_area_restriction"))
        p.service_area_restriction =
            out.response.body.at("service_area_restriction").get<std::vector<std::string>>();
    return p;
}

PccDirectives fetch_sm_policy(RunContext& ctx, const NfInstanceId& self, const NfInstanceId& pcf,
                              const std::string& supi, const Dnn& dnn, const Snssai& snssai) {
    SbiRequest req;
    req.src = self;
    req.target = pcf;
    req.method = SbiMethod::Post;
    req.uri = "/npcf-sm-policy/v1/decisions";
    req.body = Json{{"supi", supi}, {"dnn", dnn.to_string()}, {"snssai", snssai.to_string()}};
    auto out = ctx.bus->invoke(std::move(req));
    PccDirectives d;
    if (!out.ok()) return d;
    d.priority = out.response.body.value("priority", 9);
    d.max_bitrate_bps = out.response.body.value("max_bitrate_bps", int64_t{0});
    d.charging_tag = out.response.body.value("charging_tag", "default");
    return d;
}

std::optional<SliceSelection> select_slices(RunContext& ctx, const NfInstanceId& self,
                                            const NfInstanceId& nssf,
                                            const std::vector<Snssai>& requested,
                                            const std::vector<Snssai>& subscribed) {
    auto join = [](const std::vector<Snssai>& list) {
        std::string out;
        for (size_t i = 0; i < list.size(); ++i) {
            if (i) out += ",";
            out += list[i].to_string();
        }
        return out;
    };
    SbiRequest req;
    req.src = self;
    req.target = nssf;
    req.method = SbiMethod::Get;
    req.uri = "/nnssf-nsselection/v1/network-slice-information?requested=" + join(requested) +
              "&subscribed=" + join(subscribed);
    auto out = ctx.bus->invoke(std::move(req));
    if (!out.ok()) return std::nullopt;
    SliceSelection sel;
    for (const auto& s : out.response.body.at("allowed"))
        sel.allowed.push_back(Snssai::parse(s.get<std::string>()));
    sel.candidate_amfs = out.response.body.at("candidate_amfs").get<std::vector<std::string>>();
    return sel;
}

}  // namespace policy_client

}  // namespace sbacore
