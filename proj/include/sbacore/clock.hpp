/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <queue>
#include <random>
#include <thread>
#include <vector>

namespace sbacore {

// Logical time in microseconds since scenario start.
using SimTime = uint64_t;
using SimDuration = uint64_t;

inline constexpr SimDuration sim_ms(uint64_t ms) { return ms * 1000ull; }
inline constexpr SimDuration sim_sec(uint64_t s) { return s * 1000000ull; }

class Clock {
public:
    virtual ~Clock() = default;
    virtual SimTime now() const = 0;
    virtual uint64_t schedule_at(SimTime at, std::function<void()> fn) = 0;
    virtual void cancel(uint64_t timer_id) = 0;
    uint64_t schedule_after(SimDuration delay, std::function<void()> fn) {
        return schedule_at(now() + delay, std::move(fn));
    }
};

// Discrete-event loop. Single-threaded: callers run events via run_until_idle
// or advance_to; callbacks may schedule further events. Ties at one timestamp
// execute in scheduling order.
class SimClock : public Clock {
public:
    SimTime now() const override { return now_; }
    uint64_t schedule_at(SimTime at, std::function<void()> fn) override;
    void cancel(uint64_t timer_id) override;

    // Runs every pending event (including ones scheduled while running).
    void run_until_idle();
    // Runs events with time <= t, then sets now to t.
    void advance_to(SimTime t);

    size_t pending() const { return events_.size() - cancelled_.size(); }

private:
    struct Entry {
        SimTime at;
        uint64_t seq;
        uint64_t id;
        std::function<void()> fn;
        bool operator>(const Entry& o) const {
            return at != o.at ? at > o.at : seq > o.seq;
        }
    };
    void pop_and_run();

    SimTime now_ = 0;
    uint64_t next_seq_ = 0;
    uint64_t next_id_ = 1;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> events_;
    std::map<uint64_t, bool> cancelled_;  // id -> true while a cancelled entry is still queued
};

// Wall-clock backed clock for realtime mode. Logical seconds map to wall
// seconds scaled by time_scale (wall = logical * time_scale). Callbacks run
// on an internal timer thread.
class RealtimeClock : public Clock {
public:
    explicit RealtimeClock(double time_scale = 1.0);
    ~RealtimeClock() override;

    SimTime now() const override;
    uint64_t schedule_at(SimTime at, std::function<void()> fn) override;
    void cancel(uint64_t timer_id) override;

    // Blocks until all timers scheduled so far have fired (or been cancelled).
    void drain();
    // Stops firing callbacks; pending and future timers are discarded. Call
    // before tearing down objects the callbacks reference.
    void stop();

private:
    void thread_main();

    double scale_;
    std::chrono::steady_clock::time_point start_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    struct Entry {
        SimTime at;
        uint64_t seq;
        uint64_t id;
        std::function<void()> fn;
    };
    std::multimap<std::pair<SimTime, uint64_t>, Entry> timers_;
    uint64_t next_seq_ = 0;
    uint64_t next_id_ = 1;
    bool stop_ = false;
    bool running_cb_ = false;
    std::thread thread_;
};

// Deterministic RNG shared by a scenario run; every random draw in the
// system goes through one of these so a seed fixes the whole trace.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }
    uint32_t next_u32() { return static_cast<uint32_t>(engine_() >> 32); }
    // Uniform in [0, n)
    uint64_t below(uint64_t n) {
        std::uniform_int_distribution<uint64_t> d(0, n - 1);
        return d(engine_);
    }
    std::vector<uint8_t> bytes(size_t n) {
        std::vector<uint8_t> out(n);
        for (auto& b : out) b = static_cast<uint8_t>(engine_() >> 56);
        return out;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace sbacore
