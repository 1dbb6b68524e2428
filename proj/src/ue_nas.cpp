/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/ue_nas.hpp"

#include "sbacore/auth_data.hpp"
#include "sbacore/crypto.hpp"

namespace sbacore {

UeNasCore::UeNasCore(Supi supi, Bytes long_term_key)
    : supi_(std::move(supi)), key_(std::move(long_term_key)) {}

NasMessage UeNasCore::make_registration_request(const std::vector<Snssai>& requested) {
    security_.reset();
    registered_ = false;
    Json nssai = Json::array();
    for (const auto& s : requested) nssai.push_back(s.to_string());
    NasMessage m;
    m.kind = NasKind::RegistrationRequest;
    m.supi = supi_.to_string();
    m.payload = Json{{"requested_nssai", nssai}};
    return m;
}

std::optional<NasMessage> UeNasCore::on_auth_challenge(const NasMessage& challenge) {
    Bytes rand = from_hex(challenge.payload.at("rand_hex").get<std::string>());
    // authenticate the network before answering
    if (challenge.mac != aka::network_token(key_, rand)) return std::nullopt;
    security_ = SecurityCtx{aka::session_key(key_, rand), 0, 0};
    NasMessage m;
    m.kind = NasKind::AuthResponse;
    m.supi = supi_.to_string();
    m.payload = Json{{"res_hex", to_hex(aka::expected_response(key_, rand))}};
    return m;
}

bool UeNasCore::on_registration_outcome(const NasMessage& outcome) {
    if (outcome.kind == NasKind::RegistrationReject) {
        last_reject_cause_ = outcome.payload.value("cause", "unspecified");
        // a protected reject must verify when keys are present
        if (!outcome.mac.empty() && security_ &&
            !verify_protected_nas(*security_, true, outcome))
            return false;
        registered_ = false;
        security_.reset();
        return false;
    }
    if (outcome.kind != NasKind::RegistrationAccept || !security_) return false;
    if (!verify_protected_nas(*security_, true, outcome)) return false;
    allowed_nssai_.clear();
    for (const auto& s : outcome.payload.at("allowed_nssai"))
        allowed_nssai_.push_back(Snssai::parse(s.get<std::string>()));
    registered_ = true;
    last_reject_cause_.clear();
    return true;
}

NasMessage UeNasCore::make_service_request() {
    return make_protected_nas(*security_, false, NasKind::ServiceRequest, supi_.to_string(),
                              Json::object());
}

NasMessage UeNasCore::make_periodic_update() {
    return make_protected_nas(*security_, false, NasKind::PeriodicUpdate, supi_.to_string(),
                              Json::object());
}

NasMessage UeNasCore::make_deregistration_request() {
    return make_protected_nas(*security_, false, NasKind::DeregistrationRequest, supi_.to_string(),
                              Json::object());
}

NasMessage UeNasCore::make_session_transport(Json payload) {
    return make_protected_nas(*security_, false, NasKind::SessionTransport, supi_.to_string(),
                              std::move(payload));
}

bool UeNasCore::verify_downlink(const NasMessage& msg) {
    if (!security_) return false;
    return verify_protected_nas(*security_, true, msg);
}

void UeNasCore::mark_deregistered() {
    registered_ = false;
    security_.reset();
    allowed_nssai_.clear();
}

}  // namespace sbacore
