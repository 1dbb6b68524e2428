/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/userplane.hpp"

namespace sbacore {

Bytes encode_up_frame(uint32_t tunnel_id, const Bytes& payload) {
    Bytes out;
    out.reserve(8 + payload.size());
    put_u32_be(out, tunnel_id);
    put_u32_be(out, static_cast<uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

std::optional<std::pair<uint32_t, Bytes>> decode_up_frame(const Bytes& frame) {
    if (frame.size() < 8) return std::nullopt;
    uint32_t tunnel_id = get_u32_be(frame.data());
    uint32_t len = get_u32_be(frame.data() + 4);
    if (frame.size() != 8 + static_cast<size_t>(len)) return std::nullopt;
    return std::make_pair(tunnel_id, Bytes(frame.begin() + 8, frame.end()));
}

void UserPlaneFabric::attach(const std::string& node, FrameHandler handler) {
    std::lock_guard<std::mutex> lock(mu_);
    handlers_[node] = std::move(handler);
}

void UserPlaneFabric::detach(const std::string& node) {
    std::lock_guard<std::mutex> lock(mu_);
    handlers_.erase(node);
}

bool UserPlaneFabric::local_deliver(const std::string& from_node, const std::string& to_node,
                                    uint32_t tunnel_id, const Bytes& payload) {
    FrameHandler handler;
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = handlers_.find(to_node);
        if (it == handlers_.end()) return false;
        handler = it->second;
    }
    Bytes wire = encode_up_frame(tunnel_id, payload);
    auto decoded = decode_up_frame(wire);
    if (!decoded) return false;
    handler(from_node, decoded->first, std::move(decoded->second));
    return true;
}

bool UserPlaneFabric::deliver(const std::string& from_node, const std::string& to_node,
                              uint32_t tunnel_id, const Bytes& payload) {
    return local_deliver(from_node, to_node, tunnel_id, payload);
}

}  // namespace sbacore
