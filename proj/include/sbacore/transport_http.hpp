/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <atomic>
#include <memory>
#include <thread>

#include "sbacore/bus.hpp"
#include "sbacore/userplane.hpp"

namespace sbacore {

// Real-TCP transport: every invoke crosses a localhost HTTP/1.1 hop
// (request line, Content-Type: application/json, canonical JSON body).
// Routing inside the process reuses the shared Bus dispatch table; the
// target instance rides in the X-Target header.
class HttpBus : public Bus {
public:
    HttpBus(Clock* clock, TraceLog* trace);
    ~HttpBus() override;

    int port() const { return port_; }

protected:
    SbiOutcome transport_invoke(const SbiRequest& req, SimDuration deadline) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

// User-plane frames over per-node TCP listeners; the wire carries exactly
// the 4-byte tunnel id, 4-byte length, payload encoding.
class TcpUserPlaneFabric : public UserPlaneFabric {
public:
    TcpUserPlaneFabric();
    ~TcpUserPlaneFabric() override;

    void attach(const std::string& node, FrameHandler handler) override;
    void detach(const std::string& node) override;
    bool deliver(const std::string& from_node, const std::string& to_node, uint32_t tunnel_id,
                 const Bytes& payload) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sbacore
