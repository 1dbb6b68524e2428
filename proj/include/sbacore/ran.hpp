/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sbacore/context.hpp"
#include "sbacore/ids.hpp"
#include "sbacore/ue_nas.hpp"
#include "sbacore/userplane.hpp"

namespace sbacore {

struct Point {
    double x = 0;
    double y = 0;
};
double distance(const Point& a, const Point& b);

struct CellConfig {
    std::string cell_id;
    Point center;
    double radius_m = 500;
};

class EmUe;

// Emulated gNB: N2 signaling toward the bound AMF, N3 user plane toward
// the UPF, circular-cell coverage checks. No radio modeling.
class EmGnb {
public:
    EmGnb(RunContext ctx, std::string node_id, NfInstanceId amf, std::vector<CellConfig> cells,
          UserPlaneFabric* fabric);
    ~EmGnb();

    const std::string& id() const { return node_id_; }
    const NfInstanceId& amf() const { return amf_; }

    std::optional<std::string> covering_cell(const Point& p) const;
    void register_ue(EmUe* ue);
    void unregister_ue(const std::string& supi);

    // N1 uplink; returns the AMF response body.
    SbiResponse forward_nas(const NasMessage& nas);
    void notify_an_release(const std::string& supi);
    bool uplink_user(uint32_t ul_teid, const std::string& upf_node, const Bytes& payload);
    void bind_downlink(uint32_t dl_teid, EmUe* ue);
    void unbind_downlink(uint32_t dl_teid);

private:
    SbiResponse handle_n2(const SbiRequest& req);
    void on_fabric_frame(uint32_t dl_teid, Bytes payload);

    RunContext ctx_;
    std::string node_id_;
    NfInstanceId amf_;
    std::vector<CellConfig> cells_;
    UserPlaneFabric* fabric_;
    mutable std::recursive_mutex mu_;
    std::map<std::string, EmUe*> ues_;
    std::map<uint32_t, EmUe*> by_dl_teid_;
};

enum class AttachOutcome { Registered, NoCell, Rejected };

struct UeSessionInfo {
    int session_id = 0;
    std::string ue_ip;
    uint32_t ul_teid = 0;
    uint32_t dl_teid = 0;
    std::string upf_node;
    std::string dnn;
};

// Emulated UE: NAS client plus traffic source/sink, mirroring the AMF-side
// registration and connection state.
class EmUe {
public:
    EmUe(RunContext ctx, Supi supi, Bytes key, Point position,
         std::vector<Snssai> requested_nssai);

    const Supi& supi() const { return supi_; }
    Point position() const {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        return position_;
    }
    bool registered() const {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        return nas_.registered();
    }
    bool connected() const {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        return connected_;
    }
    std::optional<std::string> attached_cell() const {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        return attached_cell_;
    }
    std::string last_error() const {
        std::lock_guard<std::recursive_mutex> lock(mu_);
        return last_error_;
    }
    // quiescent-time accessors (assertions after the run has drained)
    const std::vector<Bytes>& received() const { return received_; }
    const std::map<int, UeSessionInfo>& sessions() const { return sessions_; }

    AttachOutcome attach(EmGnb* gnb);
    bool deregister();
    std::optional<int> establish_session(const std::string& dnn, const Snssai& snssai);
    bool release_session(int session_id);
    // Sends one uplink packet; triggers a service request first when idle.
    bool send(int session_id, const Bytes& payload);
    bool send_service_request();
    bool send_periodic_update();
    // Idle-mode mobility: reselection within the gNB or loss of coverage.
    void move(const Point& to);
    void go_idle();  // AN release

    // called by the gNB
    void on_paging();
    void on_downlink(const Bytes& payload);
    void on_session_setup(const UeSessionInfo& info);
    void on_session_release(int session_id);

private:
    RunContext ctx_;
    mutable std::recursive_mutex mu_;
    Supi supi_;
    Point position_;
    std::vector<Snssai> requested_nssai_;
    UeNasCore nas_;
    EmGnb* gnb_ = nullptr;
    std::optional<std::string> attached_cell_;
    bool connected_ = false;
    std::map<int, UeSessionInfo> sessions_;
    std::vector<Bytes> received_;
    std::string last_error_;
};

}  // namespace sbacore
