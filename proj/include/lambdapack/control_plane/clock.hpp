#pragma once

#include <chrono>
#include <condition_variable>
#include <mutex>

namespace lambdapack::control_plane {

using Duration = std::chrono::nanoseconds;
/// Time since the clock's own origin.
using Time = std::chrono::nanoseconds;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Time now() const = 0;
  virtual void sleep_for(Duration d) = 0;
};

class SteadyClock final : public Clock {
 public:
  SteadyClock() : origin_(std::chrono::steady_clock::now()) {}
  Time now() const override { return std::chrono::steady_clock::now() - origin_; }
  void sleep_for(Duration d) override;

 private:
  std::chrono::steady_clock::time_point origin_;
};

/// Time moves only when advance() is called. Sleepers block until someone
/// advances the clock past their deadline.
class ManualClock final : public Clock {
 public:
  Time now() const override;
  void sleep_for(Duration d) override;
  void advance(Duration d);
  void set(Time t);

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  Time now_{0};
};

/// The process-wide steady clock.
Clock& system_clock();

template <typename Rep, typename Period>
double seconds(std::chrono::duration<Rep, Period> d) {
  return std::chrono::duration<double>(d).count();
}

}  // namespace lambdapack::control_plane
