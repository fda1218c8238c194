// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Every tolerance is a named constant below.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "lambdapack/analysis/analyzer.hpp"
#include "lambdapack/control_plane/clock.hpp"
#include "lambdapack/control_plane/queue.hpp"
#include "lambdapack/control_plane/state_store.hpp"
#include "lambdapack/executor/metrics.hpp"
#include "lambdapack/executor/worker.hpp"
#include "lambdapack/harness/bench.hpp"
#include "lambdapack/harness/faults.hpp"
#include "lambdapack/harness/programs.hpp"
#include "lambdapack/harness/run.hpp"
#include "lambdapack/harness/workload.hpp"
#include "lambdapack/lang/enumerate.hpp"
#include "lambdapack/lang/parser.hpp"
#include "lambdapack/provisioner/provisioner.hpp"
#include "lambdapack/provisioner/simulation.hpp"

namespace lp = lambdapack;
using namespace std::chrono_literals;
using lp::harness::RunConfig;
using lp::harness::RunStatus;
using lp::harness::WorkloadKind;
using lp::harness::WorkloadSpec;
using lp::lang::NodeRef;

namespace {

// ---- pinned tolerances and budgets ----
constexpr double kOracleBudgetSeconds = 10.0;     // criterion 1
constexpr double kCholeskyTolerance = 1e-10;      // criterion 3
constexpr double kTsqrTolerance = 1e-10;          // criterion 3
constexpr double kGemmTolerance = 1e-12;          // criterion 3
constexpr double kNumericBudgetSeconds = 30.0;    // criterion 3
constexpr double kEquilibriumSlack = 1.0;         // criterion 4: 20 ± 1 workers
constexpr int kEquilibriumPeriods = 5;            // criterion 4
constexpr int kFaultSeeds = 20;                   // criterion 5
constexpr auto kRestoreSlack = 30ms;              // criterion 5: supervisor tick + scheduling jitter
constexpr auto kStallLease = 200ms;               // criterion 6
constexpr auto kStallTolerance = 100ms;           // criterion 6
constexpr int kCrashTrialsPerCut = 20;            // criterion 7
constexpr double kQueryGrowthLimit = 2.0;         // criterion 8: B=32 vs B=4 query median
constexpr double kEnumerationGrowthMin = 8.0;     // criterion 8: B=16 vs B=4 enumeration
constexpr double kPipelineSpeedupMin = 1.8;       // criterion 9

struct Outcome {
  bool pass = true;
  std::string detail;
};

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Quick pool defaults: no boot delay, short leases, fast polling.
RunConfig base_run(WorkloadSpec w, std::int64_t workers, std::uint64_t seed = 1) {
  RunConfig cfg;
  cfg.workload = w;
  cfg.fixed_workers = workers;
  cfg.seed = seed;
  cfg.policy.startup_latency = 0s;
  cfg.policy.period = 50ms;
  cfg.worker.lease_length = 1s;
  cfg.worker.poll_interval = 2ms;
  cfg.worker.idle_timeout = 10s;
  cfg.max_wall = 120s;
  return cfg;
}

std::set<std::pair<NodeRef, NodeRef>> implicit_edges(const lp::analysis::Analyzer& a,
                                                     const std::vector<NodeRef>& nodes, bool via_parents) {
  std::set<std::pair<NodeRef, NodeRef>> out;
  for (const auto& n : nodes) {
    if (via_parents) {
      for (auto& p : a.parents_of(n)) out.emplace(p, n);
    } else {
      for (auto& c : a.children_of(n)) out.emplace(n, c);
    }
  }
  return out;
}

// ---- 1 ----
Outcome oracle_equivalence() {
  struct Case {
    std::string name;
    lp::lang::Program program;
  };
  std::vector<Case> cases;
  for (std::int64_t b : {2, 3, 4, 8}) cases.push_back({"cholesky B=" + std::to_string(b), lp::harness::gen_cholesky(b)});
  for (std::int64_t n : {2, 4, 8, 16}) cases.push_back({"tsqr N=" + std::to_string(n), lp::harness::gen_tsqr(n)});
  for (std::int64_t b : {2, 4}) cases.push_back({"gemm B=K=" + std::to_string(b), lp::harness::gen_gemm(b, b)});

  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t edges = 0;
  for (const auto& c : cases) {
    const auto params = lp::lang::resolve_params(c.program);
    lp::analysis::Analyzer a(c.program, params);
    const auto nodes = lp::lang::enumerate_nodes(c.program, params);
    std::set<std::pair<NodeRef, NodeRef>> oracle;
    for (const auto& e : lp::lang::enumerate_edges(c.program, params)) oracle.emplace(e.from, e.to);
    edges += oracle.size();
    if (implicit_edges(a, nodes, false) != oracle || implicit_edges(a, nodes, true) != oracle) {
      o.pass = false;
      o.detail += c.name + " differs; ";
    }
  }
  const double t = since(t0);
  if (t >= kOracleBudgetSeconds) o.pass = false;
  o.detail += std::to_string(cases.size()) + " programs, " + std::to_string(edges) + " edges, " + fmt(t) + " s";
  return o;
}

// ---- 2 ----
Outcome worked_examples() {
  Outcome o;
  lp::analysis::Analyzer chol(lp::harness::gen_cholesky(4), {{"N", 4}});
  const std::vector<std::int64_t> s111{1, 1, 1};
  const auto r1 = chol.find_readers("S", s111);
  const std::vector<NodeRef> want1{{0, {{"i", 1}}}};
  if (r1 != want1) o.pass = false;

  lp::analysis::Analyzer tsqr(lp::harness::gen_tsqr(8), {{"N", 8}});
  const std::vector<std::int64_t> r61{6, 1};
  const auto r2 = tsqr.find_readers("R", r61);
  const std::vector<NodeRef> want2{{1, {{"i", 4}, {"level", 1}}}};
  if (r2 != want2) o.pass = false;
  if (tsqr.verify_binding(1, {{"i", 6}, {"level", 1}})) o.pass = false;

  o.detail = "readers(S[1,1,1]) = {";
  for (auto& n : r1) o.detail += n.to_string();
  o.detail += "}, readers(R[6,1]) = {";
  for (auto& n : r2) o.detail += n.to_string();
  o.detail += "}, candidate 1:i=6,level=1 rejected";
  return o;
}

// ---- 3 ----
Outcome numerical_oracles() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  auto check = [&](const std::string& name, WorkloadSpec w, double tol) {
    auto cfg = base_run(w, 4);
    cfg.check = true;
    const auto r = lp::harness::run(cfg);
    const bool ok = r.status == RunStatus::Ok && r.check && r.check->error <= tol;
    if (!ok) o.pass = false;
    o.detail += name + " " + (r.check ? fmt(r.check->error) : std::string("n/a")) + (ok ? "" : " FAILED") + "; ";
  };
  for (std::size_t block : {256u, 128u, 64u, 37u})
    check("cholesky 256/" + std::to_string(block), {.kind = WorkloadKind::Cholesky, .block = block, .size = 256},
          kCholeskyTolerance);
  check("tsqr 512x16/8", {.kind = WorkloadKind::Tsqr, .block = 64, .leaves = 8, .rows = 512, .cols = 16},
        kTsqrTolerance);
  check("gemm 128x128x128/32", {.kind = WorkloadKind::Gemm, .block = 32, .size = 128, .inner = 128}, kGemmTolerance);
  const double t = since(t0);
  if (t >= kNumericBudgetSeconds) o.pass = false;
  o.detail += fmt(t) + " s";
  return o;
}

// ---- 4 ----
Outcome autoscaling_formula() {
  Outcome o;
  lp::provisioner::ScalingPolicy p;
  p.sf = lp::provisioner::parse_fraction("0.5");
  p.pipeline_width = 1;
  const auto launches = lp::provisioner::desired_launches(100, 40, 0, p);
  if (launches != 10) o.pass = false;

  lp::control_plane::ManualClock clock;
  p.period = 1s;
  p.startup_latency = 1s;
  lp::provisioner::SimulatedPool pool(clock, p.startup_latency);
  lp::provisioner::Provisioner prov(p, pool, [] { return 40; }, clock);
  std::int64_t running = 0;
  bool overshoot = false;
  for (int k = 0; k < kEquilibriumPeriods; ++k) {
    prov.control_step();
    clock.advance(p.period);
    const auto c = pool.counts();
    overshoot |= c.running + c.booting > 20;
    running = c.running;
  }
  if (std::abs(static_cast<double>(running) - 20.0) > kEquilibriumSlack || overshoot) o.pass = false;
  o.detail = "desired_launches(100,40,0,0.5,1) = " + std::to_string(launches) + "; running after " +
             std::to_string(kEquilibriumPeriods) + " periods at depth 40 = " + std::to_string(running);
  return o;
}

// ---- 5 ----
Outcome fault_tolerance() {
  Outcome o;
  int identical = 0, restored = 0;
  double worst_restore = 0;
  for (int seed = 1; seed <= kFaultSeeds; ++seed) {
    auto cfg = base_run({.kind = WorkloadKind::Cholesky, .block = 32, .grid = 4}, 5, seed);
    cfg.worker.lease_length = 200ms;
    cfg.worker.compute_delay = 20ms;  // long enough for the pool to come back mid-run
    cfg.policy.startup_latency = 50ms;
    cfg.policy.period = 50ms;
    const auto clean = lp::harness::run(cfg);
    cfg.faults = lp::harness::parse_faults({"kill:0.8@50%"});
    const auto faulty = lp::harness::run(cfg);
    if (clean.status == RunStatus::Ok && faulty.status == RunStatus::Ok && faulty.output == clean.output) ++identical;
    const auto limit = lp::control_plane::seconds(cfg.policy.startup_latency + cfg.policy.period + kRestoreSlack);
    if (faulty.recoveries.size() == 1 && faulty.recoveries[0].killed == 4 && faulty.recoveries[0].restored_after &&
        *faulty.recoveries[0].restored_after <= limit) {
      ++restored;
      worst_restore = std::max(worst_restore, *faulty.recoveries[0].restored_after);
    }
  }
  o.pass = identical == kFaultSeeds && restored == kFaultSeeds;
  o.detail = std::to_string(identical) + "/" + std::to_string(kFaultSeeds) + " bit-identical, " +
             std::to_string(restored) + "/" + std::to_string(kFaultSeeds) + " restored (worst " +
             fmt(worst_restore * 1000) + " ms, limit " +
             fmt(lp::control_plane::seconds(50ms + 50ms + kRestoreSlack) * 1000) + " ms)";
  return o;
}

// ---- 6 ----
Outcome lease_properties() {
  Outcome o;
  // (a) a stalled worker's task goes to another worker once the lease lapses.
  auto workload = lp::harness::make_workload({.kind = WorkloadKind::Cholesky, .block = 16, .grid = 2}, 1);
  lp::analysis::Analyzer an(workload->program(), workload->params());
  lp::store::MemoryStore store;
  lp::control_plane::InMemoryQueue queue;
  lp::control_plane::InMemoryStateStore state;
  lp::executor::MetricsSink metrics;
  workload->seed_inputs(store, "lease");
  lp::executor::Services svc{store, queue, state, an, "lease", &metrics, nullptr};
  lp::executor::enqueue_node(svc, NodeRef{0, {{"i", 0}}});

  lp::executor::WorkerConfig wc;
  wc.lease_length = kStallLease;
  wc.poll_interval = 10ms;
  wc.idle_timeout = 5s;
  lp::executor::Worker slow(0, wc, svc), fast(1, wc, svc);
  slow.stall(5s);
  slow.start();
  while (slow.in_flight() == 0) std::this_thread::sleep_for(1ms);
  fast.start();
  const auto outputs = lp::lang::output_tiles(an.program(), an.params());
  const auto deadline = std::chrono::steady_clock::now() + 10s;
  while (!lp::executor::is_run_complete(store, "lease", outputs) && std::chrono::steady_clock::now() < deadline)
    std::this_thread::sleep_for(2ms);
  slow.kill();
  fast.stop();
  slow.join();
  fast.join();
  double first_read = -1, redelivered_read = -1;
  for (const auto& e : metrics.events()) {
    if (e.node != "0:i=0" || e.phase != lp::executor::Phase::Read) continue;
    if (e.worker == 0 && first_read < 0) first_read = e.t_start;
    if (e.worker == 1 && redelivered_read < 0) redelivered_read = e.t_start;
  }
  const double gap = redelivered_read - first_read;
  const double limit = lp::control_plane::seconds(kStallLease + wc.poll_interval + kStallTolerance);
  if (first_read < 0 || redelivered_read < 0 || gap > limit || gap < lp::control_plane::seconds(kStallLease) * 0.95)
    o.pass = false;
  o.detail = "redelivered after " + fmt(gap * 1000) + " ms (limit " + fmt(limit * 1000) + " ms); ";

  // (b) every task delivered twice: same output, each node completed once.
  auto cfg = base_run({.kind = WorkloadKind::Cholesky, .block = 16, .grid = 4}, 3);
  const auto clean = lp::harness::run(cfg);
  cfg.faults = lp::harness::parse_faults({"dup:*"});
  const auto dup = lp::harness::run(cfg);
  const bool dup_ok = dup.status == RunStatus::Ok && dup.output == clean.output &&
                      dup.completed_in_state == dup.nodes && dup.task_executions > dup.nodes;
  if (!dup_ok) o.pass = false;
  o.detail += "dup:* " + std::to_string(dup.task_executions) + " executions, " +
              std::to_string(dup.completed_in_state) + "/" + std::to_string(dup.nodes) + " completions, output " +
              (dup.output == clean.output ? "identical" : "DIFFERS");
  return o;
}

// ---- 7 ----
Outcome crash_cuts() {
  Outcome o;
  auto cfg = base_run({.kind = WorkloadKind::Cholesky, .block = 8, .grid = 4}, 3, 7);
  const auto clean = lp::harness::run(cfg);
  if (clean.status != RunStatus::Ok) return {false, "failure-free run did not complete"};
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::int64_t> nth(1, static_cast<std::int64_t>(clean.nodes));
  std::uniform_int_distribution<std::int64_t> pool(1, 4);
  int good = 0, total = 0;
  for (auto cut : lp::executor::kAllCutPoints) {
    int cut_good = 0;
    for (int trial = 0; trial < kCrashTrialsPerCut; ++trial) {
      auto c = cfg;
      c.fixed_workers = pool(rng);
      c.worker.lease_length = 100ms;
      c.faults = lp::harness::parse_faults(
          {std::string("crash:") + lp::executor::to_string(cut) + "@" + std::to_string(nth(rng))});
      const auto r = lp::harness::run(c);
      ++total;
      // The run ends once every output tile exists, so a crash right after the
      // last write can leave that one node unrecorded in the state store.
      const bool recorded = r.completed_in_state + 1 >= r.nodes;
      if (r.status == RunStatus::Ok && r.output == clean.output && recorded)
        ++cut_good;
      else
        o.detail += std::string(lp::executor::to_string(cut)) + "@" + std::to_string(c.faults.crashes[0].nth) +
                    " with " + std::to_string(*c.fixed_workers) + " workers: " + lp::harness::to_string(r.status) +
                    (r.output == clean.output ? "" : " output differs") + " " + r.message + "; ";
    }
    good += cut_good;
    if (cut_good != kCrashTrialsPerCut) {
      o.pass = false;
      o.detail += std::string(lp::executor::to_string(cut)) + " " + std::to_string(cut_good) + "/" +
                  std::to_string(kCrashTrialsPerCut) + "; ";
    }
  }
  o.detail += std::to_string(good) + "/" + std::to_string(total) + " crash trials completed with identical output";
  return o;
}

// ---- 8 ----
Outcome analysis_scaling() {
  Outcome o;
  std::set<std::string> sources;
  for (std::int64_t b : {4, 8, 16, 32}) sources.insert(lp::harness::size_free_source(lp::harness::gen_cholesky(b)));
  if (sources.size() != 1) o.pass = false;

  (void)lp::harness::bench_analysis("cholesky", 4, 50, 1);  // warm caches and allocator
  const auto b4 = lp::harness::bench_analysis("cholesky", 4, 400, 1);
  const auto b16 = lp::harness::bench_analysis("cholesky", 16, 400, 1);
  const auto b32 = lp::harness::bench_analysis("cholesky", 32, 400, 1);
  const double query_ratio = b32.children_median_seconds / b4.children_median_seconds;
  const double enum_ratio = b16.enumerate_seconds / b4.enumerate_seconds;
  if (query_ratio > kQueryGrowthLimit || enum_ratio < kEnumerationGrowthMin) o.pass = false;
  o.detail = "program text " + std::to_string(b4.program_bytes) + " bytes for every B" +
             (sources.size() == 1 ? "" : " (DIFFERS)") + "; children_of median B=32/B=4 = " + fmt(query_ratio) +
             "; enumeration B=16/B=4 = " + fmt(enum_ratio);
  return o;
}

// ---- 9 ----
Outcome pipelining() {
  Outcome o;
  auto throughput = [](int width) {
    auto cfg = base_run({.kind = WorkloadKind::Cholesky, .block = 16, .grid = 8}, 1);
    cfg.worker.pipeline_width = width;
    cfg.worker.compute_delay = 10ms;
    cfg.store.op_latency = 10ms;
    const auto r = lp::harness::run(cfg);
    return r.status == RunStatus::Ok ? static_cast<double>(r.nodes) / r.completion_time : 0.0;
  };
  const double w1 = throughput(1), w3 = throughput(3);
  const double speedup = w1 > 0 ? w3 / w1 : 0;
  if (speedup < kPipelineSpeedupMin) o.pass = false;
  o.detail = "width 1: " + fmt(w1) + " tasks/s, width 3: " + fmt(w3) + " tasks/s, speedup " + fmt(speedup);
  return o;
}

// ---- 10 ----
Outcome sf_sweep() {
  Outcome o;
  lp::analysis::Analyzer a(lp::harness::gen_cholesky(16), {{"N", 16}});
  std::vector<std::pair<std::string, lp::provisioner::SimResult>> rs;
  for (const char* sf : {"1", "1/2", "1/4", "1/16"}) {  // increasing 1/sf
    lp::provisioner::SimConfig cfg;
    cfg.policy.sf = lp::provisioner::parse_fraction(sf);
    cfg.policy.period = 1s;
    cfg.policy.startup_latency = 2s;
    cfg.task_seconds = 1;
    cfg.idle_timeout = 5;
    rs.emplace_back(sf, lp::provisioner::simulate_autoscaling(a, cfg));
  }
  for (std::size_t k = 1; k < rs.size(); ++k) {
    if (rs[k].second.worker_seconds > rs[k - 1].second.worker_seconds) o.pass = false;
    if (rs[k].second.completion_time < rs[k - 1].second.completion_time) o.pass = false;
  }
  for (const auto& [sf, r] : rs)
    o.detail += "sf=" + sf + ": " + fmt(r.completion_time) + " s, " + fmt(r.worker_seconds) + " worker-s; ";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments pick criteria by number; default runs them all.
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {1, "dependency analysis equals brute-force enumeration", oracle_equivalence},
      {2, "worked reader examples", worked_examples},
      {3, "numerical oracles", numerical_oracles},
      {4, "autoscaling formula and equilibrium", autoscaling_formula},
      {5, "recovery from killing 80% of workers", fault_tolerance},
      {6, "lease expiry and duplicate delivery", lease_properties},
      {7, "crash after every task step", crash_cuts},
      {8, "constant program size, size-independent queries", analysis_scaling},
      {9, "pipelined workers", pipelining},
      {10, "scaling-factor trade-off", sf_sweep},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " -- " << o.detail << " ["
              << fmt(since(t0)) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
