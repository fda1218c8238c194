#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lambdapack/control_plane/queue.hpp"
#include "lambdapack/executor/metrics.hpp"
#include "lambdapack/executor/worker.hpp"
#include "lambdapack/harness/faults.hpp"
#include "lambdapack/harness/workload.hpp"
#include "lambdapack/provisioner/provisioner.hpp"
#include "lambdapack/store/object_store.hpp"

namespace lambdapack::harness {

using control_plane::Duration;

/// Real worker threads behind the provisioner's launch interface. Launched
/// workers sit out the startup latency before they start polling.
class WorkerPool final : public provisioner::Launcher {
 public:
  using Factory = std::function<std::unique_ptr<executor::Worker>(int id)>;

  WorkerPool(Factory factory, Duration startup_latency, control_plane::Clock& clock = control_plane::system_clock());
  ~WorkerPool() override;

  provisioner::PoolCounts counts() override;
  void launch(std::int64_t n) override;

  /// Start workers whose boot time has passed.
  void poll();
  /// Kill round(fraction × running) running workers chosen by `rng`; returns their ids.
  std::vector<int> kill_fraction(double fraction, std::mt19937_64& rng);
  /// Stall the worker with this launch index, if it is running.
  bool stall(int worker, Duration d);
  void stop_all();
  void join_all();

  std::vector<executor::WorkerReport> reports();
  /// Launch-to-exit seconds summed over workers (still-running ones up to now).
  double worker_seconds();

 private:
  struct Entry {
    std::unique_ptr<executor::Worker> worker;
    control_plane::Time launched{0};
    control_plane::Time ready{0};
    control_plane::Time ended{-1};
    bool started = false;
    bool killed = false;
  };

  Factory factory_;
  Duration startup_latency_;
  control_plane::Clock& clock_;
  std::mutex mu_;
  std::vector<Entry> entries_;
};

struct RunConfig {
  WorkloadSpec workload;
  store::Backend backend = store::Backend::Memory;
  std::filesystem::path store_root;
  store::StoreConfig store;
  executor::WorkerConfig worker;
  /// Exactly one of fixed_workers and autoscaling drives the pool.
  std::optional<std::int64_t> fixed_workers = 4;
  provisioner::ScalingPolicy policy;
  FaultPlan faults;
  std::uint64_t seed = 1;
  bool check = false;
  std::optional<std::filesystem::path> metrics_dir;
  std::string run_id;  // derived from the seed when empty
  /// Abort if the run has not finished by then.
  Duration max_wall = std::chrono::seconds(300);
  /// Supervisor polling interval.
  Duration tick = std::chrono::milliseconds(2);
};

enum class RunStatus { Ok, CheckFailed, Aborted };
const char* to_string(RunStatus s);
/// 0 ok, 1 numerical check failure, 2 abort.
int exit_code(RunStatus s);

/// A kill event and how long the pool took to get back to its prior size.
struct Recovery {
  double at = 0;
  std::int64_t before = 0;
  std::int64_t killed = 0;
  std::optional<double> restored_after;
};

struct RunResult {
  RunStatus status = RunStatus::Aborted;
  std::string message;
  std::string description;
  Tile output;
  std::optional<CheckResult> check;

  std::uint64_t nodes = 0;
  std::uint64_t completed_in_state = 0;
  std::uint64_t task_executions = 0;  // finalize events, duplicates included
  double completion_time = 0;
  double core_seconds = 0;
  double worker_seconds = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  store::StoreStats store_stats;  // traffic after input seeding
  control_plane::QueueStats queue_stats;

  std::string state_snapshot;
  std::vector<executor::TaskEvent> events;
  std::vector<executor::WorkerReport> workers;
  std::vector<provisioner::TimelineSample> timeline;
  std::vector<Recovery> recoveries;
};

/// Partition inputs, seed every zero-parent node, run workers under the
/// provisioner until every output tile exists, then assemble, check and
/// write metrics. Errors in the configuration throw; run failures are
/// reported through RunResult::status.
RunResult run(const RunConfig& cfg);

void write_metrics(const std::filesystem::path& dir, const RunResult& r);

}  // namespace lambdapack::harness
