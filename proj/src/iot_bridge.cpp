/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/iot_bridge.hpp"

namespace sbacore {

LorawanDnBridge::LorawanDnBridge(Upf* upf, lorawan::NetworkServer* network_server, std::string dnn)
    : upf_(upf), network_server_(network_server) {
    upf_->attach_dn(dnn, [this](uint32_t ue_ip, const Bytes& payload) {
        Json doc = Json::parse(to_string(payload), nullptr, false);
        if (!doc.is_object()) return;
        std::string gateway_id = doc.value("gateway_id", "");
        if (!gateway_id.empty()) {
            // the reply path to this gateway runs back through its session
            network_server_->set_gateway_path(gateway_id, [this, ue_ip](const Json& downlink) {
                upf_->inject_downlink(ue_ip, to_bytes(canonical_json(downlink)));
            });
        }
        if (doc.value("type", "") == "uplink") {
            ++uplink_docs_;
            network_server_->handle_uplink_doc(doc);
        }
    });
}

}  // namespace sbacore
