/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/transport_http.hpp"

#define CPPHTTPLIB_THREAD_POOL_COUNT 32
#include <httplib.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <map>
#include <mutex>

namespace sbacore {

// ---------------------------------------------------------------------------
// HttpBus

struct HttpBus::Impl {
    httplib::Server server;
    std::thread server_thread;
};

HttpBus::HttpBus(Clock* clock, TraceLog* trace) : Bus(clock, trace), impl_(new Impl) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        SbiRequest sbi;
        auto method = sbi_method_from(req.method);
        if (!method) {
            res.status = 400;
            return;
        }
        sbi.method = *method;
        sbi.target = req.get_header_value("X-Target");
        sbi.src = req.get_header_value("X-Src");
        sbi.uri = req.target.empty() ? req.path : req.target;
        if (req.has_header("X-Capability"))
            sbi.headers["x-capability"] = req.get_header_value("X-Capability");
        sbi.body = req.body.empty() ? Json::object() : Json::parse(req.body, nullptr, false);
        if (sbi.body.is_discarded()) sbi.body = Json::object();

        SbiOutcome out = dispatch(sbi);
        Json envelope{{"transport", static_cast<int>(out.transport)},
                      {"status", out.response.status},
                      {"body", out.response.body}};
        if (out.response.problem)
            envelope["problem"] = Json{{"title", out.response.problem->title},
                                       {"detail", out.response.problem->detail}};
        res.status = out.delivered() ? out.response.status : 502;
        res.set_content(canonical_json(envelope), "application/json");
    };

    const char* any = ".*";
    impl_->server.Get(any, handler);
    impl_->server.Post(any, handler);
    impl_->server.Put(any, handler);
    impl_->server.Delete(any, handler);
    impl_->server.Patch(any, handler);

    port_ = impl_->server.bind_to_any_port("127.0.0.1");
    impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

HttpBus::~HttpBus() {
    impl_->server.stop();
    if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

SbiOutcome HttpBus::transport_invoke(const SbiRequest& req, SimDuration deadline) {
    httplib::Client client("127.0.0.1", port_);
    int timeout_ms = static_cast<int>(std::max<SimDuration>(deadline / 1000, 50));
    client.set_connection_timeout(0, timeout_ms * 1000);
    client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);

    httplib::Headers headers{{"X-Target", req.target}, {"X-Src", req.src}};
    auto cap = req.headers.find("x-capability");
    if (cap != req.headers.end()) headers.emplace("X-Capability", cap->second);

    std::string body = canonical_json(req.body);
    httplib::Result result;
    switch (req.method) {
        case SbiMethod::Get: result = client.Get(req.uri, headers); break;
        case SbiMethod::Post: result = client.Post(req.uri, headers, body, "application/json"); break;
        case SbiMethod::Put: result = client.Put(req.uri, headers, body, "application/json"); break;
        case SbiMethod::Delete: result = client.Delete(req.uri, headers); break;
        case SbiMethod::Patch: result = client.Patch(req.uri, headers, body, "application/json"); break;
    }

    SbiOutcome out;
    if (!result) {
        out.transport = Transport::Timeout;
        out.response = SbiResponse::fail(500, "transport-error", httplib::to_string(result.error()));
        return out;
    }
    Json envelope = Json::parse(result->body, nullptr, false);
    if (envelope.is_discarded()) {
        out.transport = Transport::Timeout;
        out.response = SbiResponse::fail(500, "bad-envelope", "unparseable transport envelope");
        return out;
    }
    out.transport = static_cast<Transport>(envelope.value("transport", 0));
    out.response.status = envelope.value("status", 500);
    out.response.body = envelope.value("body", Json::object());
    if (envelope.contains("problem"))
        out.response.problem = Problem{envelope["problem"].value("title", ""),
                                       envelope["problem"].value("detail", "")};
    return out;
}

// ---------------------------------------------------------------------------
// TcpUserPlaneFabric

namespace {

bool read_exact(int fd, uint8_t* buf, size_t n) {
    size_t got = 0;
    while (got < n) {
        ssize_t r = ::recv(fd, buf + got, n - got, 0);
        if (r <= 0) return false;
        got += size_t(r);
    }
    return true;
}

bool write_all(int fd, const uint8_t* buf, size_t n) {
    size_t sent = 0;
    while (sent < n) {
        ssize_t w = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
        if (w <= 0) return false;
        sent += size_t(w);
    }
    return true;
}

}  // namespace

struct TcpUserPlaneFabric::Impl {
    struct Listener {
        int fd = -1;
        int port = 0;
        std::thread accept_thread;
        std::vector<std::thread> conn_threads;
        std::mutex conn_mu;
        std::vector<int> conn_fds;  // accepted sockets, closed on teardown
        std::atomic<bool> stop{false};
    };
    static void close_listener(Listener& l) {
        l.stop = true;
        ::shutdown(l.fd, SHUT_RDWR);
        ::close(l.fd);
        {
            std::lock_guard<std::mutex> lock(l.conn_mu);
            for (int fd : l.conn_fds) ::shutdown(fd, SHUT_RDWR);
        }
        if (l.accept_thread.joinable()) l.accept_thread.join();
        for (auto& t : l.conn_threads)
            if (t.joinable()) t.join();
        std::lock_guard<std::mutex> lock(l.conn_mu);
        for (int fd : l.conn_fds) ::close(fd);
        l.conn_fds.clear();
    }
    std::mutex mu;
    std::map<std::string, std::unique_ptr<Listener>> listeners;  // node -> listener
    std::map<std::string, int> ports;                            // node -> port
    std::map<std::pair<std::string, std::string>, int> conns;    // (from,to) -> socket
};

TcpUserPlaneFabric::TcpUserPlaneFabric() : impl_(new Impl) {}

TcpUserPlaneFabric::~TcpUserPlaneFabric() {
    std::map<std::string, std::unique_ptr<Impl::Listener>> listeners;
    {
        std::lock_guard<std::mutex> lock(impl_->mu);
        listeners.swap(impl_->listeners);
        for (auto& [key, fd] : impl_->conns) ::close(fd);
        impl_->conns.clear();
    }
    for (auto& [node, l] : listeners) Impl::close_listener(*l);
}

void TcpUserPlaneFabric::attach(const std::string& node, FrameHandler handler) {
    UserPlaneFabric::attach(node, handler);

    auto listener = std::make_unique<Impl::Listener>();
    listener->fd = ::socket(AF_INET, SOCK_STREAM, 0);
    int on = 1;
    ::setsockopt(listener->fd, SOL_SOCKET, SO_REUSEADDR, &on, sizeof(on));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(listener->fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listener->fd, 16) != 0) {
        ::close(listener->fd);
        return;
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listener->fd, reinterpret_cast<sockaddr*>(&addr), &len);
    listener->port = ntohs(addr.sin_port);

    Impl::Listener* raw = listener.get();
    listener->accept_thread = std::thread([this, raw, node] {
        while (!raw->stop) {
            int conn = ::accept(raw->fd, nullptr, nullptr);
            if (conn < 0) break;
            {
                std::lock_guard<std::mutex> lock(raw->conn_mu);
                raw->conn_fds.push_back(conn);
            }
            raw->conn_threads.emplace_back([this, conn, node] {
                for (;;) {
                    uint8_t header[8];
                    if (!read_exact(conn, header, 8)) break;
                    uint32_t tunnel = get_u32_be(header);
                    uint32_t plen = get_u32_be(header + 4);
                    if (plen > (1u << 24)) break;
                    Bytes payload(plen);
                    if (plen && !read_exact(conn, payload.data(), plen)) break;
                    FrameHandler h;
                    {
                        std::lock_guard<std::mutex> lock(mu_);
                        auto it = handlers_.find(node);
                        if (it != handlers_.end()) h = it->second;
                    }
                    if (h) h("", tunnel, std::move(payload));
                }
                // fd closed centrally on teardown
            });
        }
    });

    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->ports[node] = listener->port;
    impl_->listeners[node] = std::move(listener);
}

void TcpUserPlaneFabric::detach(const std::string& node) {
    UserPlaneFabric::detach(node);
    std::unique_ptr<Impl::Listener> listener;
    {
        std::lock_guard<std::mutex> lock(impl_->mu);
        auto it = impl_->listeners.find(node);
        if (it == impl_->listeners.end()) return;
        listener = std::move(it->second);
        impl_->listeners.erase(it);
        impl_->ports.erase(node);
    }
    Impl::close_listener(*listener);
}

bool TcpUserPlaneFabric::deliver(const std::string& from_node, const std::string& to_node,
                                 uint32_t tunnel_id, const Bytes& payload) {
    int fd = -1;
    {
        std::lock_guard<std::mutex> lock(impl_->mu);
        auto port_it = impl_->ports.find(to_node);
        if (port_it == impl_->ports.end()) return false;
        auto key = std::make_pair(from_node, to_node);
        auto conn_it = impl_->conns.find(key);
        if (conn_it != impl_->conns.end()) {
            fd = conn_it->second;
        } else {
            fd = ::socket(AF_INET, SOCK_STREAM, 0);
            sockaddr_in addr{};
            addr.sin_family = AF_INET;
            addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
            addr.sin_port = htons(uint16_t(port_it->second));
            if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
                ::close(fd);
                return false;
            }
            int on = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &on, sizeof(on));
            impl_->conns[key] = fd;
        }
    }
    Bytes wire = encode_up_frame(tunnel_id, payload);
    if (!write_all(fd, wire.data(), wire.size())) {
        std::lock_guard<std::mutex> lock(impl_->mu);
        impl_->conns.erase({from_node, to_node});
        ::close(fd);
        return false;
    }
    return true;
}

}  // namespace sbacore
