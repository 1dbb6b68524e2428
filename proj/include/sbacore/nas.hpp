/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <optional>
#include <string>

#include "sbacore/bus.hpp"
#include "sbacore/bytes.hpp"
#include "sbacore/ids.hpp"

namespace sbacore {

enum class AccessType { ThreeGpp, NonThreeGpp };
const char* to_string(AccessType a);
std::optional<AccessType> access_type_from(const std::string& s);

enum class NasKind {
    RegistrationRequest,
    AuthChallenge,
    AuthResponse,
    RegistrationAccept,
    RegistrationReject,
    DeregistrationRequest,
    ServiceRequest,
    PeriodicUpdate,
    SessionTransport,
};

const char* to_string(NasKind k);
std::optional<NasKind> nas_kind_from(const std::string& s);

// Message kinds exchanged before a security context exists carry no MAC.
bool nas_kind_is_unprotected(NasKind k);

struct SecurityCtx {
    Bytes session_key;  // 16 bytes
    uint64_t uplink_counter = 0;
    uint64_t downlink_counter = 0;
};

struct NasMessage {
    NasKind kind = NasKind::RegistrationRequest;
    std::string supi;  // SUPI used throughout; no temporary identities
    Json payload = Json::object();
    std::string mac;  // hex, empty for unprotected kinds

    Json to_json() const;
    static NasMessage from_json(const Json& j);
};

// Integrity tag over (kind, supi, counter, canonical payload). The
// AuthChallenge instead carries the network token derived from the
// subscriber key, which the UE checks after deriving keys from rand.
std::string nas_mac(const Bytes& session_key, NasKind kind, const std::string& supi,
                    uint64_t counter, const Json& payload);

NasMessage make_protected_nas(SecurityCtx& ctx, bool downlink, NasKind kind,
                              const std::string& supi, Json payload);

// Verifies and, on success, advances the matching counter.
bool verify_protected_nas(SecurityCtx& ctx, bool downlink, const NasMessage& msg);

}  // namespace sbacore
