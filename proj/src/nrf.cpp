/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/nrf.hpp"

#include <algorithm>

#include "sbacore/uri.hpp"

namespace sbacore {

const char* to_string(NfType t) {
    switch (t) {
        case NfType::AMF: return "AMF";
        case NfType::SMF: return "SMF";
        case NfType::UPF: return "UPF";
        case NfType::AUSF: return "AUSF";
        case NfType::UDM: return "UDM";
        case NfType::PCF: return "PCF";
        case NfType::NSSF: return "NSSF";
        case NfType::NEF: return "NEF";
        case NfType::NWDAF: return "NWDAF";
        case NfType::N3IWF: return "N3IWF";
        case NfType::AF: return "AF";
    }
    return "?";
}

std::optional<NfType> nf_type_from(const std::string& s) {
    static const std::map<std::string, NfType> kMap = {
        {"AMF", NfType::AMF},     {"SMF", NfType::SMF},   {"UPF", NfType::UPF},
        {"AUSF", NfType::AUSF},   {"UDM", NfType::UDM},   {"PCF", NfType::PCF},
        {"NSSF", NfType::NSSF},   {"NEF", NfType::NEF},   {"NWDAF", NfType::NWDAF},
        {"N3IWF", NfType::N3IWF}, {"AF", NfType::AF}};
    auto it = kMap.find(s);
    if (it == kMap.end()) return std::nullopt;
    return it->second;
}

const char* to_string(NfStatus s) {
    switch (s) {
        case NfStatus::Registered: return "Registered";
        case NfStatus::Suspended: return "Suspended";
        case NfStatus::Deregistered: return "Deregistered";
    }
    return "?";
}

Json NfProfile::to_json() const {
    Json snssai_list = Json::array();
    for (const auto& s : snssais) snssai_list.push_back(s.to_string());
    return Json{{"instance_id", instance_id},
                {"nf_type", to_string(nf_type)},
                {"services", services},
                {"snssais", snssai_list},
                {"capacity", capacity},
                {"load", load},
                {"heartbeat_period_us", heartbeat_period},
                {"status", to_string(status)}};
}

NfProfile NfProfile::from_json(const Json& j) {
    NfProfile p;
    p.instance_id = j.at("instance_id").get<std::string>();
    auto type = nf_type_from(j.at("nf_type").get<std::string>());
    if (!type) throw std::invalid_argument("NfProfile: bad nf_type");
    p.nf_type = *type;
    if (j.contains("services")) p.services = j.at("services").get<std::vector<std::string>>();
    if (j.contains("snssais"))
        for (const auto& s : j.at("snssais")) p.snssais.push_back(Snssai::parse(s.get<std::string>()));
    p.capacity = j.value("capacity", 100);
    p.load = j.value("load", 0);
    p.heartbeat_period = j.value("heartbeat_period_us", sim_sec(2));
    if (p.capacity < 0 || p.capacity > 100 || p.load < 0 || p.load > 100)
        throw std::invalid_argument("NfProfile: capacity/load out of 0..100");
    return p;
}

Nrf::Nrf(RunContext ctx, NfInstanceId instance_id) : ctx_(std::move(ctx)), id_(std::move(instance_id)) {
    bind();
}

Nrf::~Nrf() { ctx_.bus->unbind_all(id_); }

void Nrf::bind() {
    ctx_.bus->bind(id_, "/nnrf-nfm/v1", [this](const SbiRequest& r) { return handle_nfm(r); });
    ctx_.bus->bind(id_, "/nnrf-disc/v1", [this](const SbiRequest& r) { return handle_disc(r); });
}

void Nrf::sweep() {
    SimTime now = ctx_.clock->now();
    for (auto& [id, entry] : instances_) {
        if (entry.profile.status == NfStatus::Registered &&
            now > entry.last_heartbeat + 2 * entry.profile.heartbeat_period) {
            entry.profile.status = NfStatus::Suspended;
        }
    }
}

SbiResponse Nrf::register_profile(NfProfile profile) {
    sweep();
    auto it = instances_.find(profile.instance_id);
    if (it != instances_.end() && it->second.profile.status == NfStatus::Registered)
        return SbiResponse::fail(409, "already-registered", profile.instance_id);
    profile.status = NfStatus::Registered;
    SimTime now = ctx_.clock->now();
    instances_[profile.instance_id] = Entry{profile, now};
    Json body = profile.to_json();
    body["heartbeat_deadline_us"] = now + 2 * profile.heartbeat_period;
    return SbiResponse::ok(body, 201);
}

SbiResponse Nrf::replace_profile(NfProfile profile) {
    sweep();
    profile.status = NfStatus::Registered;
    instances_[profile.instance_id] = Entry{profile, ctx_.clock->now()};
    return SbiResponse::ok(profile.to_json());
}

SbiResponse Nrf::heartbeat(const NfInstanceId& instance, std::optional<int> load) {
    sweep();
    auto it = instances_.find(instance);
    if (it == instances_.end() || it->second.profile.status == NfStatus::Deregistered)
        return SbiResponse::fail(404, "unknown-instance", instance);
    it->second.last_heartbeat = ctx_.clock->now();
    it->second.profile.status = NfStatus::Registered;  // heartbeat restores Suspended
    if (load) it->second.profile.load = std::clamp(*load, 0, 100);
    return SbiResponse::ok(Json{{"status", "Registered"}}, 200);
}

SbiResponse Nrf::deregister(const NfInstanceId& instance) {
    auto it = instances_.find(instance);
    if (it == instances_.end()) return SbiResponse::fail(404, "unknown-instance", instance);
    it->second.profile.status = NfStatus::Deregistered;
    return SbiResponse::ok(Json::object(), 204);
}

SbiResponse Nrf::get_profile(const NfInstanceId& instance) {
    sweep();
    auto it = instances_.find(instance);
    if (it == instances_.end()) return SbiResponse::fail(404, "unknown-instance", instance);
    return SbiResponse::ok(it->second.profile.to_json());
}

std::vector<NfProfile> Nrf::discover(const DiscoveryQuery& q) {
    sweep();
    std::vector<NfProfile> result;
    for (const auto& [id, entry] : instances_) {
        const NfProfile& p = entry.profile;
        if (p.status != NfStatus::Registered) continue;
        if (p.nf_type != q.target_type) continue;
        if (q.required_service &&
            std::find(p.services.begin(), p.services.end(), *q.required_service) == p.services.end())
            continue;
        if (q.snssai &&
            std::find(p.snssais.begin(), p.snssais.end(), *q.snssai) == p.snssais.end())
            continue;
        result.push_back(p);
    }
    std::sort(result.begin(), result.end(), [](const NfProfile& a, const NfProfile& b) {
        if (a.load != b.load) return a.load < b.load;
        if (a.capacity != b.capacity) return a.capacity > b.capacity;
        return a.instance_id < b.instance_id;
    });
    return result;
}

SbiResponse Nrf::handle_nfm(const SbiRequest& req) {
    auto segs = split_path(req.uri);
    // /nnrf-nfm/v1/nf-instances/{id}[/heartbeat]
    if (segs.size() < 4 || segs[2] != "nf-instances")
        return SbiResponse::fail(400, "bad-uri", req.uri);
    const std::string& instance = segs[3];
    bool is_heartbeat = segs.size() == 5 && segs[4] == "heartbeat";

    if (is_heartbeat && req.method == SbiMethod::Post) {
        std::optional<int> load;
        if (req.body.contains("load")) load = req.body.at("load").get<int>();
        return heartbeat(instance, load);
    }
    try {
        switch (req.method) {
            case SbiMethod::Put: {
                NfProfile p = NfProfile::from_json(req.body);
                if (p.instance_id != instance)
                    return SbiResponse::fail(400, "id-mismatch", instance);
                return register_profile(std::move(p));
            }
            case SbiMethod::Patch: {
                NfProfile p = NfProfile::from_json(req.body);
                if (p.instance_id != instance)
                    return SbiResponse::fail(400, "id-mismatch", instance);
                return replace_profile(std::move(p));
            }
            case SbiMethod::Delete:
                return deregister(instance);
            case SbiMethod::Get:
                return get_profile(instance);
            default:
                return SbiResponse::fail(400, "bad-method", to_string(req.method));
        }
    } catch (const std::exception& e) {
        return SbiResponse::fail(400, "bad-profile", e.what());
    }
}

SbiResponse Nrf::handle_disc(const SbiRequest& req) {
    if (req.method != SbiMethod::Get) return SbiResponse::fail(400, "bad-method", "");
    auto params = parse_query(req.uri);
    auto type_it = params.find("target-type");
    if (type_it == params.end()) return SbiResponse::fail(400, "missing-target-type", req.uri);
    auto type = nf_type_from(type_it->second);
    if (!type) return SbiResponse::fail(400, "bad-target-type", type_it->second);

    DiscoveryQuery q;
    q.target_type = *type;
    q.requester = req.src;
    if (auto it = params.find("service"); it != params.end()) q.required_service = it->second;
    try {
        if (auto it = params.find("snssai"); it != params.end())
            q.snssai = Snssai::parse(it->second);
    } catch (const std::exception& e) {
        return SbiResponse::fail(400, "bad-snssai", e.what());
    }

    Json list = Json::array();
    for (const auto& p : discover(q)) list.push_back(p.to_json());
    return SbiResponse::ok(Json{{"nf_instances", list}});
}

namespace nrf_client {

namespace {
SbiRequest base_req(const NfInstanceId& self, const NfInstanceId& nrf, SbiMethod m,
                    const std::string& uri) {
    SbiRequest r;
    r.src = self;
    r.target = nrf;
    r.method = m;
    r.uri = uri;
    return r;
}
}  // namespace

bool register_nf(RunContext& ctx, const NfInstanceId& self, const NfProfile& profile) {
    auto req = base_req(self, ctx.nrf, SbiMethod::Put,
                        "/nnrf-nfm/v1/nf-instances/" + profile.instance_id);
    req.body = profile.to_json();
    return ctx.bus->invoke(std::move(req)).ok();
}

bool reregister_nf(RunContext& ctx, const NfInstanceId& self, const NfProfile& profile) {
    auto req = base_req(self, ctx.nrf, SbiMethod::Patch,
                        "/nnrf-nfm/v1/nf-instances/" + profile.instance_id);
    req.body = profile.to_json();
    return ctx.bus->invoke(std::move(req)).ok();
}

bool send_heartbeat(RunContext& ctx, const NfInstanceId& self, std::optional<int> load) {
    auto req = base_req(self, ctx.nrf, SbiMethod::Post,
                        "/nnrf-nfm/v1/nf-instances/" + self + "/heartbeat");
    if (load) req.body = Json{{"load", *load}};
    return ctx.bus->invoke(std::move(req)).ok();
}

std::vector<NfProfile> discover(RunContext& ctx, const NfInstanceId& self, NfType type,
                                std::optional<std::string> service, std::optional<Snssai> snssai) {
    std::string uri = "/nnrf-disc/v1/nf-instances?target-type=" + std::string(to_string(type));
    if (service) uri += "&service=" + *service;
    if (snssai) uri += "&snssai=" + snssai->to_string();
    auto out = ctx.bus->invoke(base_req(self, ctx.nrf, SbiMethod::Get, uri));
    std::vector<NfProfile> result;
    if (!out.ok()) return result;
    for (const auto& j : out.response.body.at("nf_instances"))
        result.push_back(NfProfile::from_json(j));
    return result;
}

}  // namespace nrf_client

}  // namespace sbacore
