/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <optional>
#include <vector>

#include "sbacore/ids.hpp"
#include "sbacore/nas.hpp"

namespace sbacore {

// Device-side NAS engine: builds uplink messages, answers authentication
// challenges from the subscriber key, verifies downlink integrity. Shared
// by the emulated 3GPP UE and the non-3GPP gateway host so both accesses
// run the identical NAS sequence.
class UeNasCore {
public:
    UeNasCore() = default;
    UeNasCore(Supi supi, Bytes long_term_key);

    const Supi& supi() const { return supi_; }
    bool registered() const { return registered_; }
    bool has_keys() const { return security_.has_value(); }
    const std::vector<Snssai>& allowed_nssai() const { return allowed_nssai_; }
    std::string last_reject_cause() const { return last_reject_cause_; }

    NasMessage make_registration_request(const std::vector<Snssai>& requested);
    // Returns the AuthResponse, or nullopt when the network token fails to
    // verify (the challenge did not come from a party knowing the key).
    std::optional<NasMessage> on_auth_challenge(const NasMessage& challenge);
    // Verifies and applies an Accept/Reject; true when now registered.
    bool on_registration_outcome(const NasMessage& outcome);

    NasMessage make_service_request();
    NasMessage make_periodic_update();
    NasMessage make_deregistration_request();
    NasMessage make_session_transport(Json payload);
    // Downlink SessionTransport / protected message verification.
    bool verify_downlink(const NasMessage& msg);

    void mark_deregistered();

private:
    Supi supi_;
    Bytes key_;
    std::optional<SecurityCtx> security_;
    bool registered_ = false;
    std::vector<Snssai> allowed_nssai_;
    std::string last_reject_cause_;
};

}  // namespace sbacore
