/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sbacore/bytes.hpp"
#include "sbacore/context.hpp"
#include "sbacore/ids.hpp"

namespace sbacore {

struct SubscriberRecord {
    Supi supi;
    Bytes long_term_key;  // exactly 16 bytes, never serialized onto the bus
    std::vector<Snssai> allowed_snssais;
    std::vector<Dnn> allowed_dnns;
    std::optional<NfInstanceId> serving_amf;
    std::optional<std::vector<std::string>> access_restrictions;

    Json to_public_json() const;  // everything except the key
    static SubscriberRecord from_provisioning_json(const Json& j);  // key_hex required
};

struct AuthVector {
    Bytes rand;                 // 16-byte nonce
    Bytes xres;                 // 32-byte expected response = H(K, rand)
    Bytes derived_session_key;  // 16 bytes = H(K, rand || "ctx")[:16]
    std::string autn;           // network authenticity token, verified by the UE under K
};

// Key-derivation helpers shared by the network side and the UE model.
namespace aka {
Bytes expected_response(const Bytes& long_term_key, const Bytes& rand);
Bytes session_key(const Bytes& long_term_key, const Bytes& rand);
std::string network_token(const Bytes& long_term_key, const Bytes& rand);
}  // namespace aka

// In-memory subscriber store (the UDR data). Loaded from a provisioning
// snapshot (JSON array, keys hex-encoded) at startup.
class SubscriberStore {
public:
    void provision(SubscriberRecord rec);
    void load_provisioning(const Json& array);
    SubscriberRecord* find(const std::string& supi);
    const SubscriberRecord* find(const std::string& supi) const;
    size_t size() const { return records_.size(); }

private:
    std::map<std::string, SubscriberRecord> records_;
};

// UDM: subscription-data front end. Owns the store; authentication vectors
// are computed here so the long-term key never leaves this module.
class Udm {
public:
    Udm(RunContext ctx, NfInstanceId id, std::shared_ptr<SubscriberStore> store);
    ~Udm();

    const NfInstanceId& id() const { return id_; }

    SbiResponse subscription_data(const std::string& supi) const;
    SbiResponse generate_auth_vector(const std::string& supi);
    // Returns previous serving AMF (if different) in body.previous_amf.
    SbiResponse register_serving_amf(const std::string& supi, const NfInstanceId& amf);
    SbiResponse deregister_serving_amf(const std::string& supi, const NfInstanceId& amf);

private:
    SbiResponse handle_sdm(const SbiRequest& req);
    SbiResponse handle_uecm(const SbiRequest& req);
    SbiResponse handle_auth(const SbiRequest& req);

    RunContext ctx_;
    NfInstanceId id_;
    std::shared_ptr<SubscriberStore> store_;
};

// UDR: structured-data read endpoint over the same store; serves only
// non-secret fields (consumers: PCF, NEF, analytics).
class Udr {
public:
    Udr(RunContext ctx, NfInstanceId id, std::shared_ptr<SubscriberStore> store);
    ~Udr();
    const NfInstanceId& id() const { return id_; }

private:
    RunContext ctx_;
    NfInstanceId id_;
    std::shared_ptr<SubscriberStore> store_;
};

// AUSF: challenge/confirm against vectors fetched from UDM. Holds the
// outstanding vector per SUPI; confirm consumes it on success.
class Ausf {
public:
    Ausf(RunContext ctx, NfInstanceId id, NfInstanceId udm);
    ~Ausf();

    const NfInstanceId& id() const { return id_; }

    // Returns {rand, autn}; the expected response never leaves the AUSF.
    SbiResponse create_challenge(const std::string& supi);
    // Returns {session_key_hex} on success; failure/protocol-error otherwise.
    SbiResponse confirm(const std::string& supi, const Bytes& res);

private:
    SbiResponse handle(const SbiRequest& req);

    RunContext ctx_;
    NfInstanceId id_;
    NfInstanceId udm_;
    std::map<std::string, AuthVector> outstanding_;
};

struct UdsfBlob {
    NfInstanceId owner_nf;
    std::string key;
    Bytes value;
    uint64_t version = 0;
};

// UDSF: opaque versioned blob store for stateless NF recovery.
class Udsf {
public:
    Udsf(RunContext ctx, NfInstanceId id);
    ~Udsf();

    const NfInstanceId& id() const { return id_; }

    uint64_t put(const NfInstanceId& owner, const std::string& key, Bytes value);
    std::optional<UdsfBlob> get(const NfInstanceId& owner, const std::string& key) const;

private:
    SbiResponse handle(const SbiRequest& req);

    RunContext ctx_;
    NfInstanceId id_;
    std::map<std::pair<NfInstanceId, std::string>, UdsfBlob> blobs_;
};

// Bus-side client helpers.
namespace udsf_client {
std::optional<uint64_t> put(RunContext& ctx, const NfInstanceId& self, const NfInstanceId& udsf,
                            const std::string& owner, const std::string& key, const Bytes& value);
std::optional<UdsfBlob> get(RunContext& ctx, const NfInstanceId& self, const NfInstanceId& udsf,
                            const std::string& owner, const std::string& key);
}  // namespace udsf_client

}  // namespace sbacore
