#include "lambdapack/harness/run.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>

#include "lambdapack/analysis/analyzer.hpp"
#include "lambdapack/control_plane/state_store.hpp"
#include "lambdapack/error.hpp"
#include "lambdapack/lang/enumerate.hpp"

namespace lambdapack::harness {

using control_plane::seconds;
using executor::Worker;

// ---- pool ----

WorkerPool::WorkerPool(Factory factory, Duration startup_latency, control_plane::Clock& clock)
    : factory_(std::move(factory)), startup_latency_(startup_latency), clock_(clock) {}

WorkerPool::~WorkerPool() {
  std::lock_guard lock(mu_);
  for (auto& e : entries_) e.worker->kill();
  for (auto& e : entries_) e.worker->join();
}

provisioner::PoolCounts WorkerPool::counts() {
  std::lock_guard lock(mu_);
  provisioner::PoolCounts c;
  for (const auto& e : entries_) {
    if (e.killed) continue;
    if (!e.started) ++c.booting;
    else if (!e.worker->finished()) ++c.running;
  }
  return c;
}

void WorkerPool::launch(std::int64_t n) {
  std::lock_guard lock(mu_);
  const auto now = clock_.now();
  for (std::int64_t i = 0; i < n; ++i) {
    Entry e;
    e.worker = factory_(static_cast<int>(entries_.size()));
    e.launched = now;
    e.ready = now + startup_latency_;
    entries_.push_back(std::move(e));
  }
}

void WorkerPool::poll() {
  std::lock_guard lock(mu_);
  const auto now = clock_.now();
  for (auto& e : entries_) {
    if (!e.started && !e.killed && e.ready <= now) {
      e.worker->start();
      e.started = true;
    }
    if (e.ended.count() < 0 && ((e.started && e.worker->finished()) || e.killed)) e.ended = now;
  }
}

std::vector<int> WorkerPool::kill_fraction(double fraction, std::mt19937_64& rng) {
  std::lock_guard lock(mu_);
  std::vector<std::size_t> running;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.started && !e.killed && !e.worker->finished()) running.push_back(i);
  }
  std::shuffle(running.begin(), running.end(), rng);
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(running.size())));
  std::vector<int> ids;
  for (std::size_t k = 0; k < n; ++k) {
    auto& e = entries_[running[k]];
    e.worker->kill();
    e.killed = true;
    e.ended = clock_.now();
    ids.push_back(e.worker->id());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

bool WorkerPool::stall(int worker, Duration d) {
  std::lock_guard lock(mu_);
  if (worker < 0 || worker >= static_cast<int>(entries_.size())) return false;
  auto& e = entries_[static_cast<std::size_t>(worker)];
  if (!e.started || e.killed || e.worker->finished()) return false;
  e.worker->stall(d);
  return true;
}

void WorkerPool::stop_all() {
  std::lock_guard lock(mu_);
  for (auto& e : entries_) {
    e.worker->stop();
    if (!e.started) e.killed = true;  // never booted; nothing to drain
  }
}

void WorkerPool::join_all() {
  std::lock_guard lock(mu_);
  for (auto& e : entries_) e.worker->join();
  const auto now = clock_.now();
  for (auto& e : entries_)
    if (e.ended.count() < 0) e.ended = now;
}

std::vector<executor::WorkerReport> WorkerPool::reports() {
  std::lock_guard lock(mu_);
  std::vector<executor::WorkerReport> out;
  for (const auto& e : entries_) {
    auto r = e.worker->report();
    if (e.killed) r.reason = executor::ExitReason::Killed;
    if (!e.started) r.started = r.finished = seconds(e.ended.count() >= 0 ? e.ended : e.launched);
    out.push_back(r);
  }
  return out;
}

double WorkerPool::worker_seconds() {
  std::lock_guard lock(mu_);
  const auto now = clock_.now();
  double s = 0;
  for (const auto& e : entries_) s += seconds((e.ended.count() >= 0 ? e.ended : now) - e.launched);
  return s;
}

// ---- run ----

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::CheckFailed: return "check-failed";
    case RunStatus::Aborted: return "aborted";
  }
  return "?";
}

int exit_code(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return 0;
    case RunStatus::CheckFailed: return 1;
    case RunStatus::Aborted: return 2;
  }
  return 2;
}

namespace {

bool fires(const Trigger& t, double progress, double elapsed) {
  if (t.progress) return progress >= *t.progress;
  if (t.seconds) return elapsed >= *t.seconds;
  return false;
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  if (cfg.fixed_workers && *cfg.fixed_workers < 1) throw Error("need at least one worker");
  auto workload = make_workload(cfg.workload, cfg.seed);
  const std::string run_id = cfg.run_id.empty() ? "run-" + std::to_string(cfg.seed) : cfg.run_id;

  RunResult result;
  result.description = workload->describe();

  analysis::Analyzer analyzer(workload->program(), workload->params());
  const auto nodes = lang::enumerate_nodes(workload->program(), workload->params());
  const auto outputs = lang::output_tiles(workload->program(), workload->params());
  result.nodes = nodes.size();

  auto store = store::make_store(cfg.backend, cfg.store, cfg.store_root);
  store->remove_run(run_id);
  workload->seed_inputs(*store, run_id);
  const store::StoreStats seeded = store->stats();

  control_plane::Clock& clock = control_plane::system_clock();
  control_plane::InMemoryQueue queue(clock);
  control_plane::InMemoryStateStore state;
  executor::MetricsSink metrics;

  executor::FaultHooks hooks;
  std::vector<std::atomic<std::int64_t>> cut_counts(std::size(executor::kAllCutPoints));
  if (!cfg.faults.crashes.empty()) {
    hooks.crash_after = [&](int, const control_plane::TaskMessage&, executor::CutPoint cut) {
      const std::int64_t n = ++cut_counts[static_cast<std::size_t>(cut)];
      return std::any_of(cfg.faults.crashes.begin(), cfg.faults.crashes.end(),
                         [&](const CrashEvent& e) { return e.cut == cut && e.nth == n; });
    };
  }
  if (cfg.faults.duplicate_all) hooks.duplicate_enqueue = [](const lang::NodeRef&) { return true; };

  executor::Services services{*store, queue, state, analyzer, run_id, &metrics, &clock};
  WorkerPool pool(
      [&](int id) { return std::make_unique<Worker>(id, cfg.worker, services, hooks); },
      cfg.policy.startup_latency, clock);

  provisioner::ScalingPolicy policy = cfg.policy;
  policy.fixed_workers = cfg.fixed_workers;
  if (cfg.fixed_workers) policy.max_workers = std::max(policy.max_workers, *cfg.fixed_workers);
  provisioner::Provisioner prov(policy, pool, [&] { return static_cast<std::int64_t>(queue.depth()); }, clock);

  // Seed every node without parents; Cholesky has one, the reduction trees have many.
  const auto t_start = clock.now();
  for (const auto& n : nodes) {
    if (!analyzer.parents_of(n).empty()) continue;
    executor::enqueue_node(services, n);
    if (cfg.faults.duplicate_all) executor::enqueue_node(services, n);
  }
  // With no boot delay the first control step brings the pool up at once.
  prov.control_step();
  pool.poll();

  std::mt19937_64 fault_rng(cfg.seed * 0x2545f4914f6cdd1dULL + 1);
  std::vector<bool> kill_done(cfg.faults.kills.size()), stall_done(cfg.faults.stalls.size());
  bool complete = false;
  while (true) {
    pool.poll();
    const double elapsed = seconds(clock.now() - t_start);
    const double progress = nodes.empty() ? 1.0 : static_cast<double>(state.completed_count()) / nodes.size();

    for (std::size_t i = 0; i < cfg.faults.kills.size(); ++i) {
      if (kill_done[i] || !fires(cfg.faults.kills[i].when, progress, elapsed)) continue;
      kill_done[i] = true;
      Recovery rec;
      rec.at = elapsed;
      rec.before = pool.counts().running;
      rec.killed = static_cast<std::int64_t>(pool.kill_fraction(cfg.faults.kills[i].fraction, fault_rng).size());
      result.recoveries.push_back(rec);
    }
    for (std::size_t i = 0; i < cfg.faults.stalls.size(); ++i) {
      const auto& s = cfg.faults.stalls[i];
      if (stall_done[i] || !fires(s.when, progress, elapsed)) continue;
      stall_done[i] = pool.stall(s.worker, std::chrono::duration_cast<Duration>(std::chrono::duration<double>(s.seconds)));
    }
    const auto running = pool.counts().running;
    for (auto& rec : result.recoveries)
      if (!rec.restored_after && running >= rec.before) rec.restored_after = elapsed - rec.at;

    if (auto f = state.failure()) {
      result.message = *f;
      break;
    }
    if (executor::is_run_complete(*store, run_id, outputs)) {
      complete = true;
      result.completion_time = seconds(clock.now() - t_start);
      break;
    }
    if (clock.now() - t_start > cfg.max_wall) {
      result.message = "run did not finish within " + std::to_string(seconds(cfg.max_wall)) + " s";
      state.mark_failed(result.message);
      break;
    }
    prov.maybe_step();
    clock.sleep_for(cfg.tick);
  }

  pool.stop_all();
  pool.join_all();
  queue.close();

  const store::StoreStats end = store->stats();
  result.store_stats = {end.puts - seeded.puts, end.gets - seeded.gets, end.bytes_written - seeded.bytes_written,
                        end.bytes_read - seeded.bytes_read};
  result.queue_stats = queue.stats();
  result.completed_in_state = state.completed_count();
  result.state_snapshot = state.snapshot();
  result.events = metrics.events();
  result.core_seconds = metrics.core_seconds();
  result.workers = pool.reports();
  result.worker_seconds = pool.worker_seconds();
  result.timeline = prov.timeline();
  for (const auto& e : result.events) {
    if (e.phase == executor::Phase::Finalize) ++result.task_executions;
    result.bytes_read += e.bytes_read;
    result.bytes_written += e.bytes_written;
  }

  if (!complete) {
    result.status = RunStatus::Aborted;
  } else {
    result.output = workload->assemble_output(*store, run_id);
    result.status = RunStatus::Ok;
    if (cfg.check) {
      result.check = workload->check(result.output);
      if (result.check && !result.check->ok) {
        result.status = RunStatus::CheckFailed;
        result.message = result.check->what + " = " + std::to_string(result.check->error) + " exceeds " +
                         std::to_string(result.check->tolerance);
      }
    }
  }
  if (cfg.metrics_dir) write_metrics(*cfg.metrics_dir, result);
  return result;
}

void write_metrics(const std::filesystem::path& dir, const RunResult& r) {
  std::filesystem::create_directories(dir);
  executor::write_task_csv(dir / "tasks.csv", r.events);
  provisioner::write_timeline_csv(dir / "timeline.csv", r.timeline);
  {
    std::ofstream out(dir / "workers.csv");
    out << "worker,exit_reason,tasks_completed,bytes_read,bytes_written,started,finished\n";
    out.precision(6);
    for (const auto& w : r.workers) {
      out << w.worker << ',' << executor::to_string(w.reason) << ',' << w.tasks_completed << ',' << w.bytes_read << ','
          << w.bytes_written << ',' << std::fixed << w.started << ',' << w.finished << '\n';
    }
  }
  {
    std::ofstream out(dir / "summary.csv");
    out << "key,value\n";
    out << "status," << to_string(r.status) << '\n';
    out << "workload," << executor::csv_field(r.description) << '\n';
    out << "nodes," << r.nodes << '\n';
    out << "completed_in_state," << r.completed_in_state << '\n';
    out << "task_executions," << r.task_executions << '\n';
    out << "completion_time_s," << r.completion_time << '\n';
    out << "core_seconds," << r.core_seconds << '\n';
    out << "worker_seconds," << r.worker_seconds << '\n';
    out << "bytes_read," << r.bytes_read << '\n';
    out << "bytes_written," << r.bytes_written << '\n';
    out << "redeliveries," << r.queue_stats.redeliveries << '\n';
    if (r.check) out << "check_error," << r.check->error << '\n';
  }
  std::ofstream(dir / "state_snapshot.txt") << r.state_snapshot;
}

}  // namespace lambdapack::harness
