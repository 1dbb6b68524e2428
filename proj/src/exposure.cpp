/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/exposure.hpp"

#include <algorithm>
#include <sstream>

#include "sbacore/bytes.hpp"
#include "sbacore/crypto.hpp"
#include "sbacore/uri.hpp"

namespace sbacore {

Json StoredEvent::to_json() const {
    Json j{{"id", id}, {"kind", kind}, {"t", t}, {"payload", payload}};
    if (!supi.empty()) j["supi"] = supi;
    return j;
}

std::optional<AnalyticsMetric> analytics_metric_from(const std::string& s) {
    if (s == "NfLoadAvg") return AnalyticsMetric::NfLoadAvg;
    if (s == "SlicedUeCount") return AnalyticsMetric::SlicedUeCount;
    if (s == "UeReachabilityRatio") return AnalyticsMetric::UeReachabilityRatio;
    return std::nullopt;
}

Nwdaf::Nwdaf(RunContext ctx, NfInstanceId id) : ctx_(std::move(ctx)), id_(std::move(id)) {
    ctx_.bus->bind(id_, "/nnwdaf-analytics/v1", [this](const SbiRequest& r) { return handle(r); });
    // collect every core event published on the bus
    ctx_.bus->create_subscription(Json{{"core_event", true}}, id_, "/nnwdaf-analytics/v1/events");
}

Nwdaf::~Nwdaf() { ctx_.bus->unbind_all(id_); }

bool Nwdaf::ingest(const Json& event) {
    std::string kind = event.value("kind", "");
    if (!kCoreEventKinds.count(kind)) return false;
    std::string supi = event.value("supi", "");
    SimTime t = event.value("t", ctx_.clock->now());
    Json payload = event.value("payload", Json::object());
    std::string id = to_hex(crypto::sha256(to_bytes(
                             kind + "|" + supi + "|" + std::to_string(t) + "|" +
                             canonical_json(payload))))
                         .substr(0, 16);
    if (events_.count(id)) return true;  // duplicate id: store unchanged
    events_[id] = StoredEvent{id, kind, supi, t, std::move(payload)};
    return true;
}

std::vector<StoredEvent> Nwdaf::sorted_events() const {
    std::vector<StoredEvent> evs;
    evs.reserve(events_.size());
    for (const auto& [id, e] : events_) evs.push_back(e);
    std::sort(evs.begin(), evs.end(), [](const StoredEvent& a, const StoredEvent& b) {
        return a.t != b.t ? a.t < b.t : a.id < b.id;
    });
    return evs;
}

std::optional<double> Nwdaf::metric_over(AnalyticsMetric metric,
                                         const std::vector<StoredEvent>& evs, SimTime from,
                                         SimTime to, const std::optional<Snssai>& snssai) const {
    switch (metric) {
        case AnalyticsMetric::NfLoadAvg: {
            double sum = 0;
            int n = 0;
            for (const auto& e : evs) {
                if (e.kind != "NfLoadSample" || e.t <= from || e.t > to) continue;
                sum += e.payload.value("value", 0.0);
                ++n;
            }
            if (n == 0) return std::nullopt;
            return sum / n;
        }
        case AnalyticsMetric::SlicedUeCount: {
            // distinct SUPIs whose establishments outnumber releases
            std::map<std::string, int> balance;
            bool any = false;
            for (const auto& e : evs) {
                if (e.t <= from || e.t > to) continue;
                if (e.kind != "SessionEstablished" && e.kind != "SessionReleased") continue;
                if (snssai &&
                    e.payload.value("snssai", "") != snssai->to_string())
                    continue;
                any = true;
                balance[e.supi] += e.kind == "SessionEstablished" ? 1 : -1;
            }
            if (!any) return std::nullopt;
            int count = 0;
            for (const auto& [supi, b] : balance)
                if (b > 0) ++count;
            return double(count);
        }
        case AnalyticsMetric::UeReachabilityRatio: {
            std::map<std::string, bool> last;
            for (const auto& e : evs) {
                if (e.t <= from || e.t > to) continue;
                if (e.kind == "UeReachable") last[e.supi] = true;
                if (e.kind == "UeUnreachable") last[e.supi] = false;
            }
            if (last.empty()) return std::nullopt;
            int reachable = 0;
            for (const auto& [supi, r] : last)
                if (r) ++reachable;
            return double(reachable) / double(last.size());
        }
    }
    return std::nullopt;
}

std::optional<AnalyticsReport> Nwdaf::analytics(AnalyticsMetric metric, SimDuration window,
                                                std::optional<Snssai> snssai,
                                                std::optional<SimTime> at) const {
    if (window == 0) return std::nullopt;
    SimTime now = at.value_or(ctx_.clock->now());
    auto evs = sorted_events();
    SimTime from = now >= window ? now - window : 0;
    auto value = metric_over(metric, evs, from, now, snssai);
    if (!value) return std::nullopt;

    AnalyticsReport report;
    report.metric = metric;
    report.window = window;
    report.value = *value;

    // moving-average projection: mean of the last three window values
    std::vector<double> means;
    for (int k = 2; k >= 0; --k) {
        SimTime w_to = now - SimDuration(k) * window;
        if (w_to < window) break;
        auto m = metric_over(metric, evs, w_to - window, w_to, snssai);
        if (!m) break;
        means.push_back(*m);
    }
    if (means.size() == 3)
        report.forecast = (means[0] + means[1] + means[2]) / 3.0;
    return report;
}

std::string Nwdaf::export_jsonl() const {
    std::ostringstream out;
    for (const auto& e : sorted_events()) out << canonical_json(e.to_json()) << "\n";
    return out.str();
}

void Nwdaf::register_metric(const std::string& name, MetricFn fn) {
    custom_metrics_[name] = std::move(fn);
}

std::optional<double> Nwdaf::custom_metric(const std::string& name, SimDuration window) const {
    auto it = custom_metrics_.find(name);
    if (it == custom_metrics_.end()) return std::nullopt;
    SimTime now = ctx_.clock->now();
    return it->second(sorted_events(), now >= window ? now - window : 0, now, std::nullopt);
}

SbiResponse Nwdaf::handle(const SbiRequest& req) {
    auto segs = split_path(req.uri);
    if (segs.size() < 3) return SbiResponse::fail(400, "bad-uri", req.uri);

    if (segs[2] == "events" && req.method == SbiMethod::Post) {
        // bus notify envelope {event_id, event}
        ingest(req.body.value("event", Json::object()));
        return SbiResponse::ok();
    }
    if (segs[2] == "ingest" && req.method == SbiMethod::Post) {
        if (!ingest(req.body)) return SbiResponse::fail(400, "bad-event", "unknown kind");
        return SbiResponse::ok(Json{{"stored", events_.size()}}, 201);
    }
    if (segs[2] == "load-series" && req.method == SbiMethod::Get) {
        auto params = parse_query(req.uri);
        SimTime from = params.count("from_us") ? std::stoull(params["from_us"]) : 0;
        SimTime to = params.count("to_us") ? std::stoull(params["to_us"]) : ctx_.clock->now();
        Json samples = Json::array();
        for (const auto& e : sorted_events()) {
            if (e.kind != "NfLoadSample" || e.t < from || e.t > to) continue;
            samples.push_back(Json{{"t", e.t}, {"value", e.payload.value("value", 0.0)}});
        }
        return SbiResponse::ok(Json{{"samples", samples}});
    }
    if (segs[2] == "analytics" && req.method == SbiMethod::Get) {
        auto params = parse_query(req.uri);
        auto metric = analytics_metric_from(params.count("metric") ? params["metric"] : "");
        if (!metric) return SbiResponse::fail(400, "bad-metric", req.uri);
        SimDuration window = params.count("window_us") ? std::stoull(params["window_us"]) : 0;
        if (window == 0) return SbiResponse::fail(400, "bad-window", "window must be positive");
        std::optional<Snssai> snssai;
        if (params.count("snssai")) snssai = Snssai::parse(params["snssai"]);
        auto report = analytics(*metric, window, snssai);
        if (!report) return SbiResponse::fail(404, "no-data", "no events in window");
        Json body{{"metric", params["metric"]}, {"window_us", window}, {"value", report->value}};
        if (report->forecast) body["forecast"] = *report->forecast;
        return SbiResponse::ok(body);
    }
    return SbiResponse::fail(400, "bad-uri", req.uri);
}

Nef::Nef(RunContext ctx, NfInstanceId id, std::vector<AfProfile> afs)
    : ctx_(std::move(ctx)), id_(std::move(id)) {
    for (auto& af : afs) afs_[af.af_id] = af;
    ctx_.bus->bind(id_, "/nnef-event-exposure/v1",
                   [this](const SbiRequest& r) { return handle(r); });
    ctx_.bus->set_nef_instance(id_);
}

Nef::~Nef() { ctx_.bus->unbind_all(id_); }

SbiResponse Nef::subscribe(const std::string& af_id, const std::string& kind,
                           const std::string& supi, const std::string& callback_uri) {
    auto it = afs_.find(af_id);
    if (it == afs_.end()) return SbiResponse::fail(403, "forbidden", "AF not provisioned");
    if (!kCoreEventKinds.count(kind)) return SbiResponse::fail(400, "bad-kind", kind);
    if (it->second.trust == AfTrust::Low && !kLowTrustKinds.count(kind))
        return SbiResponse::fail(403, "forbidden", "kind restricted to high-trust AFs");

    Json filter{{"core_event", true}, {"kind", kind}};
    if (!supi.empty()) filter["supi"] = supi;
    std::string sub = ctx_.bus->create_subscription(filter, af_id, callback_uri);
    return SbiResponse::ok(Json{{"subscription_id", sub}}, 201);
}

SbiResponse Nef::grant_capability(const std::string& af_id) {
    auto it = afs_.find(af_id);
    if (it == afs_.end()) return SbiResponse::fail(403, "forbidden", "AF not provisioned");
    if (it->second.trust != AfTrust::High)
        return SbiResponse::fail(403, "forbidden", "direct calls require high trust");
    return SbiResponse::ok(Json{{"token", ctx_.bus->grant_direct_token(af_id)}}, 201);
}

SbiResponse Nef::handle(const SbiRequest& req) {
    auto segs = split_path(req.uri);
    if (segs.size() < 3 || req.method != SbiMethod::Post)
        return SbiResponse::fail(400, "bad-uri", req.uri);
    if (segs[2] == "subscriptions") {
        return subscribe(req.body.value("af_id", req.src), req.body.value("kind", ""),
                         req.body.value("supi", ""),
                         req.body.value("callback_uri", "/naf-sink/v1/notify"));
    }
    if (segs[2] == "capabilities") return grant_capability(req.body.value("af_id", req.src));
    return SbiResponse::fail(400, "bad-uri", req.uri);
}

SampleAf::SampleAf(RunContext ctx, NfInstanceId id, AfTrust trust)
    : ctx_(std::move(ctx)), id_(std::move(id)) {
    ctx_.bus->register_principal(id_, PrincipalKind::ApplicationFunction, trust);
    ctx_.bus->bind(id_, "/naf-sink/v1", [this](const SbiRequest& req) {
        notifications_.push_back(req.body);
        return SbiResponse::ok();
    });
}

SampleAf::~SampleAf() { ctx_.bus->unbind_all(id_); }

SbiResponse SampleAf::subscribe_via_nef(const NfInstanceId& nef, const std::string& kind,
                                        const std::string& supi) {
    SbiRequest req;
    req.src = id_;
    req.target = nef;
    req.method = SbiMethod::Post;
    req.uri = "/nnef-event-exposure/v1/subscriptions";
    req.body = Json{{"af_id", id_}, {"kind", kind}, {"callback_uri", "/naf-sink/v1/notify"}};
    if (!supi.empty()) req.body["supi"] = supi;
    return ctx_.bus->invoke(std::move(req)).response;
}

SbiResponse SampleAf::request_capability(const NfInstanceId& nef) {
    SbiRequest req;
    req.src = id_;
    req.target = nef;
    req.method = SbiMethod::Post;
    req.uri = "/nnef-event-exposure/v1/capabilities";
    req.body = Json{{"af_id", id_}};
    auto out = ctx_.bus->invoke(std::move(req)).response;
    if (out.status < 300) token_ = out.body.value("token", "");
    return out;
}

SbiOutcome SampleAf::direct_call(const NfInstanceId& target, const std::string& uri) {
    SbiRequest req;
    req.src = id_;
    req.target = target;
    req.method = SbiMethod::Get;
    req.uri = uri;
    if (!token_.empty()) req.headers["x-capability"] = token_;
    return ctx_.bus->invoke(std::move(req));
}

}  // namespace sbacore
