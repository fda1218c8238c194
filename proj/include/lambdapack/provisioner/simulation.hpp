#pragma once

#include <cstdint>
#include <vector>

#include "lambdapack/analysis/analyzer.hpp"
#include "lambdapack/control_plane/clock.hpp"
#include "lambdapack/provisioner/provisioner.hpp"

namespace lambdapack::provisioner {

/// A pool of make-believe workers on a manual clock: launched workers boot
/// for startup_latency, then count as running until the owner retires them.
class SimulatedPool final : public Launcher {
 public:
  struct Member {
    double launched_at = 0;
    double ready_at = 0;
    double exited_at = -1;  // < 0 while alive
    double idle_since = 0;
    std::vector<double> busy_until;  // one entry per task in flight
  };

  SimulatedPool(control_plane::ManualClock& clock, Duration startup_latency)
      : clock_(clock), startup_latency_(startup_latency) {}

  PoolCounts counts() override;
  void launch(std::int64_t n) override;

  std::vector<Member>& members() { return members_; }
  /// Sum over members of (exit or `now`) − launch.
  double worker_seconds(double now) const;

 private:
  control_plane::ManualClock& clock_;
  Duration startup_latency_;
  std::vector<Member> members_;
};

struct SimConfig {
  ScalingPolicy policy;
  double task_seconds = 1.0;
  double idle_timeout = 10.0;
  double dt = 0.05;
  /// Give up after this much simulated time.
  double max_seconds = 1e6;
};

struct SimResult {
  double completion_time = 0;
  /// Launch-to-exit time summed over workers, including the idle tail.
  double worker_seconds = 0;
  std::int64_t peak_workers = 0;
  std::int64_t tasks = 0;
  std::vector<TimelineSample> timeline;
};

/// Deterministic time-stepped execution of a program's task graph under the
/// autoscaling policy: FIFO queue, fixed task duration, worker boot latency
/// and idle timeout. Used for the scaling-factor trade-off sweep.
SimResult simulate_autoscaling(const analysis::Analyzer& analyzer, const SimConfig& cfg);

}  // namespace lambdapack::provisioner
