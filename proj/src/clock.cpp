/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/clock.hpp"

#include <chrono>

namespace sbacore {

uint64_t SimClock::schedule_at(SimTime at, std::function<void()> fn) {
    if (at < now_) at = now_;  // past deadlines fire immediately, never rewind time
    uint64_t id = next_id_++;
    events_.push(Entry{at, next_seq_++, id, std::move(fn)});
    return id;
}

void SimClock::cancel(uint64_t timer_id) { cancelled_[timer_id] = true; }

void SimClock::pop_and_run() {
    Entry e = events_.top();
    events_.pop();
    auto it = cancelled_.find(e.id);
    if (it != cancelled_.end()) {
        cancelled_.erase(it);
        return;
    }
    now_ = e.at;
    e.fn();
}

void SimClock::run_until_idle() {
    while (!events_.empty()) pop_and_run();
}

void SimClock::advance_to(SimTime t) {
    while (!events_.empty() && events_.top().at <= t) pop_and_run();
    if (t > now_) now_ = t;
}

RealtimeClock::RealtimeClock(double time_scale)
    : scale_(time_scale), start_(std::chrono::steady_clock::now()) {
    thread_ = std::thread([this] { thread_main(); });
}

RealtimeClock::~RealtimeClock() { stop(); }

void RealtimeClock::stop() {
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (stop_) return;
        stop_ = true;
        timers_.clear();
    }
    cv_.notify_all();
    idle_cv_.notify_all();
    if (thread_.joinable()) thread_.join();
}

SimTime RealtimeClock::now() const {
    auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
                       std::chrono::steady_clock::now() - start_)
                       .count();
    return static_cast<SimTime>(static_cast<double>(elapsed) / scale_);
}

uint64_t RealtimeClock::schedule_at(SimTime at, std::function<void()> fn) {
    std::lock_guard<std::mutex> lock(mu_);
    if (stop_) return next_id_++;
    uint64_t id = next_id_++;
    timers_.emplace(std::make_pair(at, next_seq_), Entry{at, next_seq_, id, std::move(fn)});
    ++next_seq_;
    cv_.notify_all();
    return id;
}

void RealtimeClock::cancel(uint64_t timer_id) {
    std::lock_guard<std::mutex> lock(mu_);
    for (auto it = timers_.begin(); it != timers_.end(); ++it) {
        if (it->second.id == timer_id) {
            timers_.erase(it);
            idle_cv_.notify_all();
            return;
        }
    }
}

void RealtimeClock::drain() {
    std::unique_lock<std::mutex> lock(mu_);
    idle_cv_.wait(lock, [this] { return (timers_.empty() && !running_cb_) || stop_; });
}

void RealtimeClock::thread_main() {
    std::unique_lock<std::mutex> lock(mu_);
    while (!stop_) {
        if (timers_.empty()) {
            idle_cv_.notify_all();
            cv_.wait(lock, [this] { return stop_ || !timers_.empty(); });
            continue;
        }
        SimTime due = timers_.begin()->second.at;
        auto wall_due = start_ + std::chrono::microseconds(
                                     static_cast<int64_t>(static_cast<double>(due) * scale_));
        if (std::chrono::steady_clock::now() < wall_due) {
            cv_.wait_until(lock, wall_due);
            continue;  // re-check: queue head may have changed
        }
        Entry e = std::move(timers_.begin()->second);
        timers_.erase(timers_.begin());
        running_cb_ = true;
        lock.unlock();
        e.fn();
        lock.lock();
        running_cb_ = false;
        idle_cv_.notify_all();
    }
}

}  // namespace sbacore
