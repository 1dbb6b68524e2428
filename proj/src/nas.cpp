/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/nas.hpp"

#include "sbacore/crypto.hpp"

namespace sbacore {

const char* to_string(AccessType a) {
    return a == AccessType::ThreeGpp ? "3gpp" : "non-3gpp";
}

std::optional<AccessType> access_type_from(const std::string& s) {
    if (s == "3gpp") return AccessType::ThreeGpp;
    if (s == "non-3gpp") return AccessType::NonThreeGpp;
    return std::nullopt;
}

const char* to_string(NasKind k) {
    switch (k) {
        case NasKind::RegistrationRequest: return "RegistrationRequest";
        case NasKind::AuthChallenge: return "AuthChallenge";
        case NasKind::AuthResponse: return "AuthResponse";
        case NasKind::RegistrationAccept: return "RegistrationAccept";
        case NasKind::RegistrationReject: return "RegistrationReject";
        case NasKind::DeregistrationRequest: return "DeregistrationRequest";
        case NasKind::ServiceRequest: return "ServiceRequest";
        case NasKind::PeriodicUpdate: return "PeriodicUpdate";
        case NasKind::SessionTransport: return "SessionTransport";
    }
    return "?";
}

std::optional<NasKind> nas_kind_from(const std::string& s) {
    static const std::map<std::string, NasKind> kMap = {
        {"RegistrationRequest", NasKind::RegistrationRequest},
        {"AuthChallenge", NasKind::AuthChallenge},
        {"AuthResponse", NasKind::AuthResponse},
        {"RegistrationAccept", NasKind::RegistrationAccept},
        {"RegistrationReject", NasKind::RegistrationReject},
        {"DeregistrationRequest", NasKind::DeregistrationRequest},
        {"ServiceRequest", NasKind::ServiceRequest},
        {"PeriodicUpdate", NasKind::PeriodicUpdate},
        {"SessionTransport", NasKind::SessionTransport}};
    auto it = kMap.find(s);
    if (it == kMap.end()) return std::nullopt;
    return it->second;
}

bool nas_kind_is_unprotected(NasKind k) {
    return k == NasKind::RegistrationRequest || k == NasKind::AuthResponse;
}

Json NasMessage::to_json() const {
    return Json{{"kind", to_string(kind)}, {"supi", supi}, {"payload", payload}, {"mac", mac}};
}

NasMessage NasMessage::from_json(const Json& j) {
    NasMessage m;
    auto kind = nas_kind_from(j.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("NasMessage: bad kind");
    m.kind = *kind;
    m.supi = j.at("supi").get<std::string>();
    m.payload = j.value("payload", Json::object());
    m.mac = j.value("mac", "");
    return m;
}

std::string nas_mac(const Bytes& session_key, NasKind kind, const std::string& supi,
                    uint64_t counter, const Json& payload) {
    std::string input = std::string(to_string(kind)) + "|" + supi + "|" +
                        std::to_string(counter) + "|" + canonical_json(payload);
    return to_hex(crypto::hmac_sha256(session_key, to_bytes(input))).substr(0, 16);
}

NasMessage make_protected_nas(SecurityCtx& ctx, bool downlink, NasKind kind,
                              const std::string& supi, Json payload) {
    uint64_t& counter = downlink ? ctx.downlink_counter : ctx.uplink_counter;
    NasMessage m;
    m.kind = kind;
    m.supi = supi;
    m.payload = std::move(payload);
    m.mac = nas_mac(ctx.session_key, kind, supi, counter, m.payload);
    ++counter;
    return m;
}

bool verify_protected_nas(SecurityCtx& ctx, bool downlink, const NasMessage& msg) {
    uint64_t& counter = downlink ? ctx.downlink_counter : ctx.uplink_counter;
    std::string expected = nas_mac(ctx.session_key, msg.kind, msg.supi, counter, msg.payload);
    if (!crypto::constant_time_equal(to_bytes(expected), to_bytes(msg.mac))) return false;
    ++counter;
    return true;
}

}  // namespace sbacore
