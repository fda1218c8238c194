#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lambdapack/analysis/analyzer.hpp"
#include "lambdapack/control_plane/clock.hpp"
#include "lambdapack/control_plane/queue.hpp"
#include "lambdapack/control_plane/state_store.hpp"
#include "lambdapack/executor/metrics.hpp"
#include "lambdapack/store/object_store.hpp"

namespace lambdapack::executor {

using control_plane::Duration;
using namespace std::chrono_literals;

struct WorkerConfig {
  Duration lease_length = 10s;
  /// Zero means lease_length / 3.
  Duration renew_interval = 0s;
  int pipeline_width = 1;
  Duration runtime_limit = 300s;
  Duration poll_interval = 10ms;
  Duration idle_timeout = 10s;
  /// Deliveries of a task whose inputs are missing before the run is aborted.
  int missing_input_delivery_cap = 10;
  /// Extra time spent in the compute phase of every task (benchmarks only).
  Duration compute_delay = 0s;

  Duration effective_renew_interval() const { return renew_interval.count() > 0 ? renew_interval : lease_length / 3; }
  /// Renewals allowed per task; past this the lease is left to lapse.
  long max_renewals() const { return lease_length.count() > 0 ? static_cast<long>(runtime_limit / lease_length) : 0; }
};

/// True iff the worker should stop: close enough to the runtime limit that a
/// task of `headroom` length might not finish, or idle for the idle timeout.
bool should_self_terminate(const WorkerConfig& cfg, Duration elapsed, Duration idle, Duration headroom = Duration{0});

/// The ordered steps of a task; a fault plan can kill the worker right after any of them.
enum class CutPoint { AfterRead, AfterCompute, AfterWrite, AfterRecord, AfterEnqueue };
inline constexpr CutPoint kAllCutPoints[] = {CutPoint::AfterRead, CutPoint::AfterCompute, CutPoint::AfterWrite,
                                             CutPoint::AfterRecord, CutPoint::AfterEnqueue};
const char* to_string(CutPoint c);

struct FaultHooks {
  /// Return true to kill the worker right after `cut` for this task.
  std::function<bool(int worker, const control_plane::TaskMessage&, CutPoint cut)> crash_after;
  /// Return true to enqueue a ready node twice.
  std::function<bool(const lang::NodeRef&)> duplicate_enqueue;
};

struct Services {
  store::ObjectStore& store;
  control_plane::TaskQueue& queue;
  control_plane::StateStore& state;
  const analysis::Analyzer& analyzer;
  std::string run_id;
  MetricsSink* metrics = nullptr;
  control_plane::Clock* clock = nullptr;  // defaults to the system clock
};

enum class ExitReason { Idle, RuntimeLimit, Killed, Stopped, Aborted };
const char* to_string(ExitReason r);

struct WorkerReport {
  int worker = -1;
  ExitReason reason = ExitReason::Stopped;
  std::uint64_t tasks_completed = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  double started = 0;
  double finished = 0;
};

/// Enqueue `node` and note it in the state store.
void enqueue_node(const Services& s, const lang::NodeRef& node);

/// True iff every output tile of the program exists in the store.
bool is_run_complete(store::ObjectStore& store, const std::string& run_id, const std::vector<lang::TileRef>& outputs);

/// A stateless worker: up to pipeline_width task slots overlapping their
/// read/compute/write phases on one compute core, plus a lease-renewal timer.
/// Everything it knows lives in the store, queue and state services.
class Worker {
 public:
  Worker(int id, WorkerConfig cfg, Services services, FaultHooks hooks = {});
  ~Worker();
  Worker(const Worker&) = delete;
  Worker& operator=(const Worker&) = delete;

  void start();
  /// Die immediately: in-flight tasks are dropped and their leases lapse.
  void kill();
  /// Finish in-flight tasks, take no new ones, then exit.
  void stop();
  /// Freeze compute and lease renewal for `d`, as a straggler would.
  void stall(Duration d);
  void join();

  int id() const { return id_; }
  bool finished() const { return finished_.load(); }
  bool alive() const { return started_.load() && !finished_.load(); }
  std::size_t in_flight() const;
  WorkerReport report() const;

  /// Run one delivered task through all phases: read, compute, write, record
  /// completion, enqueue ready children, delete. Returns false if the task was
  /// abandoned (missing input, failure, or the worker died).
  bool execute_task(const control_plane::TaskMessage& msg, control_plane::Receipt receipt);

 private:
  struct Held {
    control_plane::TaskMessage msg;
    control_plane::Receipt receipt;
    long renewals = 0;
    bool lost = false;
  };
  struct Killed {};

  void slot_loop(int slot);
  bool run_task(const control_plane::TaskMessage& msg, int slot);
  void renew_loop();
  void check_alive() const;
  void maybe_crash(const control_plane::TaskMessage& msg, CutPoint cut);
  void wait_while_stalled();
  bool interruptible_sleep(Duration d);
  control_plane::Receipt current_receipt(int slot);
  Duration p95_task_time() const;
  double now_s() const;
  void finish_with(ExitReason r);

  int id_;
  WorkerConfig cfg_;
  Services svc_;
  FaultHooks hooks_;
  control_plane::Clock& clock_;

  std::atomic<bool> started_{false}, killed_{false}, stopping_{false}, finished_{false};
  std::atomic<long> stalled_until_ns_{0};
  std::mutex core_mu_;  // one compute core per worker

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<int, Held> held_;  // slot -> leased task
  control_plane::Time start_time_{0};
  control_plane::Time last_found_{0};
  int active_slots_ = 0;
  int next_direct_slot_ = -1;
  std::vector<Duration> task_times_;
  std::optional<ExitReason> exit_reason_;
  WorkerReport report_;

  std::vector<std::thread> slots_;
  std::thread renewer_;
};

}  // namespace lambdapack::executor
