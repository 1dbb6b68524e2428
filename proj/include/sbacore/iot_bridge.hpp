/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include "sbacore/lorawan.hpp"
#include "sbacore/session.hpp"

namespace sbacore {

// Glue between the UPF's data-network side and the LoRaWAN servers: uplink
// documents arriving over gateway PDU sessions feed the network server,
// and the reverse path injects downlink documents at the gateway's UE IP.
class LorawanDnBridge {
public:
    LorawanDnBridge(Upf* upf, lorawan::NetworkServer* network_server,
                    std::string dnn = "lorawan");

    uint64_t uplink_docs() const { return uplink_docs_; }

private:
    Upf* upf_;
    lorawan::NetworkServer* network_server_;
    uint64_t uplink_docs_ = 0;
};

}  // namespace sbacore
