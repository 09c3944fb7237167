// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <thread>

namespace medfleet::detail {

// Monotonic seconds source with injectable sleeping, so rate-limit and retry
// behavior can be tested against a manual clock without real waiting.
class Clock {
public:
    virtual ~Clock() = default;
    virtual double now() = 0;
    virtual void sleep_for(double seconds) = 0;
};

class SystemClock final : public Clock {
public:
    double now() override {
        auto t = std::chrono::steady_clock::now().time_since_epoch();
        return std::chrono::duration<double>(t).count();
    }
    void sleep_for(double seconds) override {
        if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    }
};

class FakeClock final : public Clock {
public:
    double now() override { return now_; }
    void sleep_for(double seconds) override {
        if (seconds > 0) now_ += seconds;
    }
    void advance(double seconds) { now_ += seconds; }

private:
    double now_ = 0.0;
};

inline Clock& system_clock() {
    static SystemClock clock;
    return clock;
}

}  // namespace medfleet::detail
