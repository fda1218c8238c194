#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "lambdapack/analysis/solver.hpp"
#include "lambdapack/control_plane/clock.hpp"

namespace lambdapack::provisioner {

using analysis::Rational;
using control_plane::Duration;
using namespace std::chrono_literals;

struct ScalingPolicy {
  Rational sf{1, 2};
  int pipeline_width = 1;
  Duration period = 1s;
  Duration startup_latency = 10s;
  std::int64_t max_workers = 1024;
  /// When set, ignore the queue and hold the pool at this size, replacing
  /// workers that die.
  std::optional<std::int64_t> fixed_workers;
};

/// Parse "0.5", "1/3" or "2" into an exact fraction.
Rational parse_fraction(std::string_view text);

/// max(0, ceil(sf·pending/width) − running − booting), capped so the pool
/// never exceeds max_workers.
std::int64_t desired_launches(std::int64_t pending, std::int64_t running, std::int64_t booting,
                              const ScalingPolicy& policy);

/// ceil(sf·pending/width): the pool size the policy steers towards.
std::int64_t target_workers(std::int64_t pending, const ScalingPolicy& policy);

struct PoolCounts {
  std::int64_t running = 0;
  std::int64_t booting = 0;
};

/// Whatever actually starts workers: real threads or a simulation.
class Launcher {
 public:
  virtual ~Launcher() = default;
  virtual PoolCounts counts() = 0;
  /// Start `n` workers; each begins polling after the startup latency.
  virtual void launch(std::int64_t n) = 0;
};

struct TimelineSample {
  double t = 0;
  std::int64_t pending = 0;
  std::int64_t running = 0;
  std::int64_t booting = 0;
  std::int64_t launched = 0;
};

/// The control loop body. Scale-down is left to worker idle timeouts; the
/// provisioner only ever launches.
class Provisioner {
 public:
  Provisioner(ScalingPolicy policy, Launcher& launcher, std::function<std::int64_t()> pending,
              control_plane::Clock& clock = control_plane::system_clock());

  /// Sample the queue, launch workers, record a timeline sample.
  TimelineSample control_step();
  /// Run control_step if a period has elapsed since the previous one.
  std::optional<TimelineSample> maybe_step();

  const std::vector<TimelineSample>& timeline() const { return timeline_; }
  const ScalingPolicy& policy() const { return policy_; }

 private:
  ScalingPolicy policy_;
  Launcher& launcher_;
  std::function<std::int64_t()> pending_;
  control_plane::Clock& clock_;
  std::optional<control_plane::Time> last_step_;
  std::vector<TimelineSample> timeline_;
};

void write_timeline_csv(const std::filesystem::path& path, const std::vector<TimelineSample>& samples);

}  // namespace lambdapack::provisioner
