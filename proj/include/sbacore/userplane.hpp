/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "sbacore/bytes.hpp"

namespace sbacore {

// User-plane frame, bit-exact: 4-byte big-endian tunnel id, 4-byte
// big-endian payload length, payload.
Bytes encode_up_frame(uint32_t tunnel_id, const Bytes& payload);
std::optional<std::pair<uint32_t, Bytes>> decode_up_frame(const Bytes& frame);

// Tunnel ids for sessions bridged from non-3GPP access carry the high bit;
// RAN-bridged sessions never use this namespace.
inline constexpr uint32_t kNonTgppTunnelBit = 0x80000000u;

// Transport for user-plane frames between nodes (gNB/N3IWF <-> UPF).
// The loopback implementation still round-trips every frame through the
// wire encoding so the format stays exercised.
class UserPlaneFabric {
public:
    using FrameHandler =
        std::function<void(const std::string& from_node, uint32_t tunnel_id, Bytes payload)>;

    virtual ~UserPlaneFabric() = default;

    virtual void attach(const std::string& node, FrameHandler handler);
    virtual void detach(const std::string& node);
    virtual bool deliver(const std::string& from_node, const std::string& to_node,
                         uint32_t tunnel_id, const Bytes& payload);

protected:
    bool local_deliver(const std::string& from_node, const std::string& to_node,
                       uint32_t tunnel_id, const Bytes& payload);

    std::mutex mu_;
    std::map<std::string, FrameHandler> handlers_;
};

}  // namespace sbacore
