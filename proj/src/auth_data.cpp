/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/auth_data.hpp"

#include "sbacore/crypto.hpp"
#include "sbacore/uri.hpp"

namespace sbacore {

namespace aka {

Bytes expected_response(const Bytes& long_term_key, const Bytes& rand) {
    return crypto::hmac_sha256(long_term_key, rand);
}

Bytes session_key(const Bytes& long_term_key, const Bytes& rand) {
    Bytes input = rand;
    Bytes label = to_bytes("ctx");
    input.insert(input.end(), label.begin(), label.end());
    Bytes full = crypto::hmac_sha256(long_term_key, input);
    full.resize(16);
    return full;
}

std::string network_token(const Bytes& long_term_key, const Bytes& rand) {
    Bytes input = rand;
    Bytes label = to_bytes("autn");
    input.insert(input.end(), label.begin(), label.end());
    return to_hex(crypto::hmac_sha256(long_term_key, input)).substr(0, 16);
}

}  // namespace aka

Json SubscriberRecord::to_public_json() const {
    Json snssais = Json::array();
    for (const auto& s : allowed_snssais) snssais.push_back(s.to_string());
    Json dnns = Json::array();
    for (const auto& d : allowed_dnns) dnns.push_back(d.to_string());
    Json j{{"supi", supi.to_string()}, {"allowed_snssais", snssais}, {"allowed_dnns", dnns}};
    if (serving_amf) j["serving_amf"] = *serving_amf;
    if (access_restrictions) j["access_restrictions"] = *access_restrictions;
    return j;
}

SubscriberRecord SubscriberRecord::from_provisioning_json(const Json& j) {
    SubscriberRecord rec;
    rec.supi = Supi::parse(j.at("supi").get<std::string>());
    rec.long_term_key = from_hex(j.at("key_hex").get<std::string>());
    if (rec.long_term_key.size() != 16)
        throw std::invalid_argument("SubscriberRecord: key must be exactly 16 bytes");
    for (const auto& s : j.value("allowed_snssais", Json::array()))
        rec.allowed_snssais.push_back(Snssai::parse(s.get<std::string>()));
    for (const auto& d : j.value("allowed_dnns", Json::array()))
        rec.allowed_dnns.push_back(Dnn::make(d.get<std::string>()));
    if (j.contains("access_restrictions"))
        rec.access_restrictions = j.at("access_restrictions").get<std::vector<std::string>>();
    return rec;
}

void SubscriberStore::provision(SubscriberRecord rec) {
    records_[rec.supi.to_string()] = std::move(rec);
}

void SubscriberStore::load_provisioning(const Json& array) {
    for (const auto& j : array) provision(SubscriberRecord::from_provisioning_json(j));
}

SubscriberRecord* SubscriberStore::find(const std::string& supi) {
    auto it = records_.find(supi);
    return it == records_.end() ? nullptr : &it->second;
}

const SubscriberRecord* SubscriberStore::find(const std::string& supi) const {
    auto it = records_.find(supi);
    return it == records_.end() ? nullptr : &it->second;
}

Udm::Udm(RunContext ctx, NfInstanceId id, std::shared_ptr<SubscriberStore> store)
    : ctx_(std::move(ctx)), id_(std::move(id)), store_(std::move(store)) {
    ctx_.bus->bind(id_, "/nudm-sdm/v1", [this](const SbiRequest& r) { return handle_sdm(r); });
    ctx_.bus->bind(id_, "/nudm-uecm/v1", [this](const SbiRequest& r) { return handle_uecm(r); });
    ctx_.bus->bind(id_, "/nudm-auth/v1", [this](const SbiRequest& r) { return handle_auth(r); });
}

Udm::~Udm() { ctx_.bus->unbind_all(id_); }

SbiResponse Udm::subscription_data(const std::string& supi) const {
    const SubscriberRecord* rec = store_->find(supi);
    if (!rec) return SbiResponse::fail(404, "unknown-subscriber", supi);
    return SbiResponse::ok(rec->to_public_json());
}

SbiResponse Udm::generate_auth_vector(const std::string& supi) {
    const SubscriberRecord* rec = store_->find(supi);
    if (!rec) return SbiResponse::fail(404, "unknown-subscriber", supi);
    Bytes rand = ctx_.rng->bytes(16);
    Bytes xres = aka::expected_response(rec->long_term_key, rand);
    Bytes skey = aka::session_key(rec->long_term_key, rand);
    std::string autn = aka::network_token(rec->long_term_key, rand);
    return SbiResponse::ok(Json{{"rand_hex", to_hex(rand)},
                                {"xres_hex", to_hex(xres)},
                                {"session_key_hex", to_hex(skey)},
                                {"autn", autn}},
                           201);
}

SbiResponse Udm::register_serving_amf(const std::string& supi, const NfInstanceId& amf) {
    SubscriberRecord* rec = store_->find(supi);
    if (!rec) return SbiResponse::fail(404, "unknown-subscriber", supi);
    Json body = Json::object();
    if (rec->serving_amf && *rec->serving_amf != amf) body["previous_amf"] = *rec->serving_amf;
    rec->serving_amf = amf;
    return SbiResponse::ok(body, 201);
}

SbiResponse Udm::deregister_serving_amf(const std::string& supi, const NfInstanceId& amf) {
    SubscriberRecord* rec = store_->find(supi);
    if (!rec) return SbiResponse::fail(404, "unknown-subscriber", supi);
    if (rec->serving_amf == amf) rec->serving_amf.reset();
    return SbiResponse::ok(Json::object(), 204);
}

SbiResponse Udm::handle_sdm(const SbiRequest& req) {
    auto segs = split_path(req.uri);  // /nudm-sdm/v1/{supi}
    if (segs.size() < 3) return SbiResponse::fail(400, "bad-uri", req.uri);
    if (req.method != SbiMethod::Get) return SbiResponse::fail(400, "bad-method", "");
    return subscription_data(segs[2]);
}

SbiResponse Udm::handle_uecm(const SbiRequest& req) {
    auto segs = split_path(req.uri);  // /nudm-uecm/v1/{supi}/registrations[/{amf}]
    if (segs.size() < 4 || segs[3] != "registrations")
        return SbiResponse::fail(400, "bad-uri", req.uri);
    const std::string& supi = segs[2];
    if (req.method == SbiMethod::Post)
        return register_serving_amf(supi, req.body.at("amf_id").get<std::string>());
    if (req.method == SbiMethod::Delete && segs.size() == 5)
        return deregister_serving_amf(supi, segs[4]);
    return SbiResponse::fail(400, "bad-method", "");
}

SbiResponse Udm::handle_auth(const SbiRequest& req) {
    auto segs = split_path(req.uri);  // /nudm-auth/v1/{supi}/generate
    if (segs.size() != 4 || segs[3] != "generate" || req.method != SbiMethod::Post)
        return SbiResponse::fail(400, "bad-uri", req.uri);
    return generate_auth_vector(segs[2]);
}

Udr::Udr(RunContext ctx, NfInstanceId id, std::shared_ptr<SubscriberStore> store)
    : ctx_(std::move(ctx)), id_(std::move(id)), store_(std::move(store)) {
    ctx_.bus->bind(id_, "/nudr-dr/v1", [this](const SbiRequest& req) {
        auto segs = split_path(req.uri);  // /nudr-dr/v1/subscribers/{supi}
        if (segs.size() != 4 || segs[2] != "subscribers" || req.method != SbiMethod::Get)
            return SbiResponse::fail(400, "bad-uri", req.uri);
        const SubscriberRecord* rec = store_->find(segs[3]);
        if (!rec) return SbiResponse::fail(404, "unknown-subscriber", segs[3]);
        return SbiResponse::ok(rec->to_public_json());
    });
}

Udr::~Udr() { ctx_.bus->unbind_all(id_); }

Ausf::Ausf(RunContext ctx, NfInstanceId id, NfInstanceId udm)
    : ctx_(std::move(ctx)), id_(std::move(id)), udm_(std::move(udm)) {
    ctx_.bus->bind(id_, "/nausf-auth/v1", [this](const SbiRequest& r) { return handle(r); });
}

Ausf::~Ausf() { ctx_.bus->unbind_all(id_); }

SbiResponse Ausf::create_challenge(const std::string& supi) {
    SbiRequest req;
    req.src = id_;
    req.target = udm_;
    req.method = SbiMethod::Post;
    req.uri = "/nudm-auth/v1/" + supi + "/generate";
    auto out = ctx_.bus->invoke(std::move(req));
    if (!out.delivered()) return SbiResponse::fail(503, "udm-unreachable", udm_);
    if (!out.ok()) return out.response;

    AuthVector v;
    v.rand = from_hex(out.response.body.at("rand_hex").get<std::string>());
    v.xres = from_hex(out.response.body.at("xres_hex").get<std::string>());
    v.derived_session_key = from_hex(out.response.body.at("session_key_hex").get<std::string>());
    v.autn = out.response.body.at("autn").get<std::string>();
    Json challenge{{"rand_hex", to_hex(v.rand)}, {"autn", v.autn}};
    outstanding_[supi] = std::move(v);
    return SbiResponse::ok(challenge, 201);
}

SbiResponse Ausf::confirm(const std::string& supi, const Bytes& res) {
    auto it = outstanding_.find(supi);
    if (it == outstanding_.end())
        return SbiResponse::fail(409, "protocol-error", "no outstanding vector for " + supi);
    if (!crypto::constant_time_equal(res, it->second.xres))
        return SbiResponse::fail(403, "auth-failed", supi);
    Json body{{"session_key_hex", to_hex(it->second.derived_session_key)}};
    outstanding_.erase(it);  // single use
    return SbiResponse::ok(body);
}

SbiResponse Ausf::handle(const SbiRequest& req) {
    auto segs = split_path(req.uri);  // /nausf-auth/v1/{supi}/(challenge|confirm)
    if (segs.size() != 4 || req.method != SbiMethod::Post)
        return SbiResponse::fail(400, "bad-uri", req.uri);
    const std::string& supi = segs[2];
    if (segs[3] == "challenge") return create_challenge(supi);
    if (segs[3] == "confirm") {
        try {
            return confirm(supi, from_hex(req.body.at("res_hex").get<std::string>()));
        } catch (const std::exception& e) {
            return SbiResponse::fail(400, "bad-request", e.what());
        }
    }
    return SbiResponse::fail(400, "bad-uri", req.uri);
}

Udsf::Udsf(RunContext ctx, NfInstanceId id) : ctx_(std::move(ctx)), id_(std::move(id)) {
    ctx_.bus->bind(id_, "/nudsf-store/v1", [this](const SbiRequest& r) { return handle(r); });
}

Udsf::~Udsf() { ctx_.bus->unbind_all(id_); }

uint64_t Udsf::put(const NfInstanceId& owner, const std::string& key, Bytes value) {
    auto& blob = blobs_[{owner, key}];
    blob.owner_nf = owner;
    blob.key = key;
    blob.value = std::move(value);
    blob.version += 1;
    return blob.version;
}

std::optional<UdsfBlob> Udsf::get(const NfInstanceId& owner, const std::string& key) const {
    auto it = blobs_.find({owner, key});
    if (it == blobs_.end()) return std::nullopt;
    return it->second;
}

SbiResponse Udsf::handle(const SbiRequest& req) {
    auto segs = split_path(req.uri);  // /nudsf-store/v1/{owner}/{key...}
    if (segs.size() < 4) return SbiResponse::fail(400, "bad-uri", req.uri);
    const std::string& owner = segs[2];
    std::string key = segs[3];
    for (size_t i = 4; i < segs.size(); ++i) key += "/" + segs[i];

    if (req.method == SbiMethod::Put) {
        Bytes value = from_base64(req.body.at("value_b64").get<std::string>());
        return SbiResponse::ok(Json{{"version", put(owner, key, std::move(value))}}, 201);
    }
    if (req.method == SbiMethod::Get) {
        auto blob = get(owner, key);
        if (!blob) return SbiResponse::fail(404, "not-found", owner + "/" + key);
        return SbiResponse::ok(
            Json{{"value_b64", to_base64(blob->value)}, {"version", blob->version}});
    }
    return SbiResponse::fail(400, "bad-method", "");
}

namespace udsf_client {

std::optional<uint64_t> put(RunContext& ctx, const NfInstanceId& self, const NfInstanceId& udsf,
                            const std::string& owner, const std::string& key, const Bytes& value) {
    SbiRequest req;
    req.src = self;
    req.target = udsf;
    req.method = SbiMethod::Put;
    req.uri = "/nudsf-store/v1/" + owner + "/" + key;
    req.body = Json{{"value_b64", to_base64(value)}};
    auto out = ctx.bus->invoke(std::move(req));
    if (!out.ok()) return std::nullopt;
    return out.response.body.at("version").get<uint64_t>();
}

std::optional<UdsfBlob> get(RunContext& ctx, const NfInstanceId& self, const NfInstanceId& udsf,
                            const std::string& owner, const std::string& key) {
    SbiRequest req;
    req.src = self;
    req.target = udsf;
    req.method = SbiMethod::Get;
    req.uri = "/nudsf-store/v1/" + owner + "/" + key;
    auto out = ctx.bus->invoke(std::move(req));
    if (!out.ok()) return std::nullopt;
    UdsfBlob blob;
    blob.owner_nf = owner;
    blob.key = key;
    blob.value = from_base64(out.response.body.at("value_b64").get<std::string>());
    blob.version = out.response.body.at("version").get<uint64_t>();
    return blob;
}

}  // namespace udsf_client

}  // namespace sbacore
