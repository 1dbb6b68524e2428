/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/context.hpp"

namespace sbacore {

void Metrics::add(const std::string& key, int64_t delta) {
    std::lock_guard<std::mutex> lock(mu_);
    counters_[key] += delta;
}

void Metrics::set(const std::string& key, int64_t value) {
    std::lock_guard<std::mutex> lock(mu_);
    counters_[key] = value;
}

int64_t Metrics::get(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = counters_.find(key);
    return it == counters_.end() ? 0 : it->second;
}

Json Metrics::to_json() const {
    std::lock_guard<std::mutex> lock(mu_);
    Json j = Json::object();
    for (const auto& [k, v] : counters_) j[k] = v;
    return j;
}

void NasLog::append(NasRecord r) {
    std::lock_guard<std::mutex> lock(mu_);
    records_.push_back(std::move(r));
}

std::vector<NasRecord> NasLog::snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return records_;
}

std::vector<std::string> NasLog::kinds_for(const std::string& supi) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<std::string> out;
    for (const auto& r : records_)
        if (r.supi == supi) out.push_back(r.kind);
    return out;
}

}  // namespace sbacore
