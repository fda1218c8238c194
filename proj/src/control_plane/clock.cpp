#include "lambdapack/control_plane/clock.hpp"

#include <thread>

namespace lambdapack::control_plane {

void SteadyClock::sleep_for(Duration d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

Time ManualClock::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

void ManualClock::sleep_for(Duration d) {
  std::unique_lock lock(mu_);
  const Time deadline = now_ + d;
  cv_.wait(lock, [&] { return now_ >= deadline; });
}

void ManualClock::advance(Duration d) {
  {
    std::lock_guard lock(mu_);
    now_ += d;
  }
  cv_.notify_all();
}

void ManualClock::set(Time t) {
  {
    std::lock_guard lock(mu_);
    if (t > now_) now_ = t;
  }
  cv_.notify_all();
}

Clock& system_clock() {
  static SteadyClock clock;
  return clock;
}

}  // namespace lambdapack::control_plane
