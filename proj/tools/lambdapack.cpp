// lambdapack command-line tool: run programs, query and enumerate their task
// graphs, benchmark the analysis, validate sources.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lambdapack/analysis/analyzer.hpp"
#include "lambdapack/error.hpp"
#include "lambdapack/harness/bench.hpp"
#include "lambdapack/harness/faults.hpp"
#include "lambdapack/harness/programs.hpp"
#include "lambdapack/harness/run.hpp"
#include "lambdapack/lang/enumerate.hpp"
#include "lambdapack/lang/parser.hpp"
#include "lambdapack/provisioner/provisioner.hpp"

namespace lp = lambdapack;
using lp::harness::RunStatus;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheck = 1;
constexpr int kExitAbort = 2;
constexpr int kExitUsage = 3;

struct UsageError : lp::Error {
  using Error::Error;
};

lp::control_plane::Duration secs(double s) {
  if (!(s >= 0)) throw UsageError("durations must be nonnegative");
  return std::chrono::duration_cast<lp::control_plane::Duration>(std::chrono::duration<double>(s));
}

std::int64_t to_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = std::string::npos;
  }
  if (used != s.size()) throw UsageError("bad integer '" + s + "' for " + what);
  return v;
}

lp::lang::Binding parse_params(const std::vector<std::string>& kvs) {
  lp::lang::Binding b;
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects NAME=VALUE, got '" + kv + "'");
    b[kv.substr(0, eq)] = to_int(kv.substr(eq + 1), "--param " + kv.substr(0, eq));
  }
  return b;
}

// Where the program text comes from; shared by every subcommand.
struct Source {
  std::string program_path;
  std::string builtin;
  std::vector<std::string> params;

  void add_to(CLI::App* app) {
    auto* p = app->add_option("--program", program_path, "LAmbdaPACK source file")->check(CLI::ExistingFile);
    auto* b = app->add_option("--builtin", builtin, "shipped program: cholesky, tsqr or gemm")
                  ->check(CLI::IsMember(lp::harness::builtin_names()));
    p->excludes(b);
    app->add_option("--param", params, "override a program parameter, NAME=VALUE (repeatable)");
  }

  std::string text() const {
    if (!program_path.empty()) {
      std::ifstream in(program_path);
      if (!in) throw UsageError("cannot read " + program_path);
      std::stringstream ss;
      ss << in.rdbuf();
      return ss.str();
    }
    if (builtin.empty()) throw UsageError("one of --program or --builtin is required");
    return lp::harness::builtin_source(builtin);
  }

  // Parsed program with every parameter bound.
  std::pair<lp::lang::Program, lp::lang::Binding> load() const {
    auto program = lp::lang::parse_program(text());
    auto bound = lp::lang::resolve_params(program, parse_params(params));
    return {std::move(program), std::move(bound)};
  }
};

void print_nodes(const std::vector<lp::lang::NodeRef>& nodes) {
  for (const auto& n : nodes) std::cout << n.to_string() << '\n';
}

// ---- run ----

struct RunArgs {
  Source src;
  std::int64_t grid = 0;
  std::size_t block = 64;
  std::size_t size = 0, inner = 0, rows = 0, cols = 8;
  std::int64_t leaves = 0;
  std::string backend = "mem";
  std::string root;
  double store_latency_ms = 0;
  double store_bandwidth = 0;
  std::int64_t workers = 0;
  std::string autoscale;
  double startup_latency = 0;
  std::int64_t max_workers = 1024;
  int pipeline = 1;
  double lease = 10, runtime_limit = 300, idle_timeout = 10;
  std::vector<std::string> faults;
  std::uint64_t seed = 1;
  bool check = false;
  std::string metrics;
  double max_wall = 300;
};

lp::harness::RunConfig make_run_config(const RunArgs& a) {
  using lp::harness::WorkloadKind;
  lp::harness::RunConfig cfg;
  auto& w = cfg.workload;
  w.block = a.block;
  w.size = a.size;
  w.inner = a.inner;
  w.rows = a.rows;
  w.cols = a.cols;
  w.grid = a.grid;
  if (!a.src.program_path.empty()) {
    w.kind = WorkloadKind::Custom;
    w.program_path = a.src.program_path;
    w.params = parse_params(a.src.params);
  } else {
    if (a.src.builtin.empty()) throw UsageError("one of --program or --builtin is required");
    const auto params = parse_params(a.src.params);
    auto param = [&](const char* k) -> std::optional<std::int64_t> {
      auto it = params.find(k);
      return it == params.end() ? std::nullopt : std::optional(it->second);
    };
    for (const auto& [k, v] : params)
      if (k != "N" && !(a.src.builtin == "gemm" && k == "K")) throw UsageError("unknown parameter '" + k + "'");
    if (a.src.builtin == "cholesky") {
      w.kind = WorkloadKind::Cholesky;
      if (auto n = param("N")) w.grid = *n;
    } else if (a.src.builtin == "tsqr") {
      w.kind = WorkloadKind::Tsqr;
      w.leaves = a.leaves > 0 ? a.leaves : param("N").value_or(a.grid > 0 ? a.grid : 4);
    } else {
      w.kind = WorkloadKind::Gemm;
      if (auto n = param("N")) w.grid = *n;
      if (auto k = param("K")) w.inner = static_cast<std::size_t>(*k) * a.block;
    }
    if (w.kind != WorkloadKind::Tsqr && w.grid == 0 && w.size == 0) w.grid = 4;
  }

  if (a.backend == "fs") {
    if (a.root.empty()) throw UsageError("--backend fs needs --root DIR");
    cfg.backend = lp::store::Backend::Filesystem;
    cfg.store_root = a.root;
  } else if (a.backend != "mem") {
    throw UsageError("--backend must be mem or fs");
  }
  cfg.store.op_latency = std::chrono::duration_cast<std::chrono::microseconds>(secs(a.store_latency_ms / 1000.0));
  cfg.store.bytes_per_second = a.store_bandwidth;

  cfg.worker.pipeline_width = a.pipeline;
  cfg.worker.lease_length = secs(a.lease);
  cfg.worker.runtime_limit = secs(a.runtime_limit);
  cfg.worker.idle_timeout = secs(a.idle_timeout);
  cfg.policy.pipeline_width = a.pipeline;
  cfg.policy.startup_latency = secs(a.startup_latency);
  cfg.policy.max_workers = a.max_workers;

  if (!a.autoscale.empty()) {
    cfg.fixed_workers.reset();
    std::stringstream ss(a.autoscale);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      const std::string key = item.substr(0, eq), val = eq == std::string::npos ? "" : item.substr(eq + 1);
      if (key == "sf") cfg.policy.sf = lp::provisioner::parse_fraction(val);
      else if (key == "period") cfg.policy.period = secs(std::stod(val));
      else throw UsageError("--autoscale takes sf=F,period=S; got '" + item + "'");
    }
  } else {
    cfg.fixed_workers = a.workers > 0 ? a.workers : 4;
  }
  cfg.faults = lp::harness::parse_faults(a.faults);
  cfg.seed = a.seed;
  cfg.check = a.check;
  if (!a.metrics.empty()) cfg.metrics_dir = a.metrics;
  cfg.max_wall = secs(a.max_wall);
  return cfg;
}

int cmd_run(const RunArgs& a) {
  lp::harness::RunConfig cfg;
  lp::harness::RunResult r;
  // run() only throws for bad configuration (shapes, program text); failures
  // during execution come back as a status.
  try {
    cfg = make_run_config(a);
    r = lp::harness::run(cfg);
  } catch (const lp::Error& e) {
    throw UsageError(e.what());
  }
  std::cout << "status " << lp::harness::to_string(r.status) << '\n'
            << "workload " << r.description << '\n'
            << "nodes " << r.nodes << '\n'
            << "task_executions " << r.task_executions << '\n'
            << "completion_time_s " << r.completion_time << '\n'
            << "core_seconds " << r.core_seconds << '\n'
            << "worker_seconds " << r.worker_seconds << '\n'
            << "bytes_read " << r.bytes_read << '\n'
            << "bytes_written " << r.bytes_written << '\n'
            << "redeliveries " << r.queue_stats.redeliveries << '\n';
  if (r.check) {
    std::cout << "check " << r.check->what << " = " << r.check->error << " (tolerance " << r.check->tolerance << ") "
              << (r.check->ok ? "ok" : "FAILED") << '\n';
  }
  for (const auto& rec : r.recoveries) {
    std::cout << "kill at " << rec.at << " s: " << rec.killed << " of " << rec.before << " workers; ";
    if (rec.restored_after) std::cout << "pool restored after " << *rec.restored_after << " s\n";
    else std::cout << "pool not restored\n";
  }
  if (!r.message.empty()) std::cerr << "lambdapack: " << r.message << '\n';
  if (r.status == RunStatus::Aborted && !cfg.metrics_dir) std::cerr << "state snapshot:\n" << r.state_snapshot;
  return lp::harness::exit_code(r.status);
}

// ---- analyze ----

struct AnalyzeArgs {
  Source src;
  std::string node;
  bool children = false, parents = false;
};

int cmd_analyze(const AnalyzeArgs& a) {
  auto [program, params] = a.src.load();
  lp::analysis::Analyzer an(std::move(program), params);
  const auto n = lp::lang::NodeRef::parse(a.node);
  if (n.line < 0 || n.line >= static_cast<int>(an.lines().size()) || !an.verify_binding(n.line, n.binding)) {
    throw UsageError("node " + a.node + " is not in the program's iteration space");
  }
  print_nodes(a.parents ? an.parents_of(n) : an.children_of(n));
  return kExitOk;
}

// ---- enumerate-dag ----

struct EnumerateArgs {
  Source src;
  bool nodes_only = false;
  bool summary = false;
};

int cmd_enumerate(const EnumerateArgs& a) {
  const auto [program, params] = a.src.load();
  const auto nodes = lp::lang::enumerate_nodes(program, params);
  if (a.summary) {
    const auto edges = lp::lang::enumerate_edges(program, params);
    std::cout << "nodes " << nodes.size() << "\nedges " << edges.size() << '\n';
    return kExitOk;
  }
  if (a.nodes_only) {
    print_nodes(nodes);
    return kExitOk;
  }
  std::cout << "parent,child\n";
  for (const auto& e : lp::lang::enumerate_edges(program, params)) {
    std::cout << lp::executor::csv_field(e.from.to_string()) << ',' << lp::executor::csv_field(e.to.to_string())
              << '\n';
  }
  return kExitOk;
}

// ---- bench-analysis ----

struct BenchArgs {
  std::string builtin = "cholesky";
  std::vector<std::int64_t> grids{4, 8, 16, 32};
  int queries = 200;
  std::uint64_t seed = 1;
};

int cmd_bench(const BenchArgs& a) {
  std::vector<lp::harness::AnalysisBenchRow> rows;
  for (auto g : a.grids) rows.push_back(lp::harness::bench_analysis(a.builtin, g, a.queries, a.seed));
  lp::harness::write_bench_csv(std::cout, rows);
  return kExitOk;
}

// ---- validate ----

int cmd_validate(const Source& src) {
  lp::lang::Program program;
  lp::lang::Binding params;
  try {
    std::tie(program, params) = src.load();
  } catch (const lp::ParseError& e) {
    std::cout << "invalid: " << e.what() << '\n';
    return kExitCheck;
  }
  const auto violations = lp::lang::validate_ssa(program, params);
  if (violations.empty()) {
    std::cout << "ok: program " << program.name << " " << lp::lang::to_string(params) << ", "
              << lp::lang::enumerate_nodes(program, params).size() << " nodes\n";
    return kExitOk;
  }
  for (const auto& v : violations) {
    std::cout << "ssa violation: " << v.tile.to_string() << " written by";
    for (const auto& w : v.writers) std::cout << ' ' << w.to_string();
    std::cout << '\n';
  }
  return kExitCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LAmbdaPACK runtime: run tiled linear algebra programs on a stateless worker pool"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "execute a program end to end");
  run.src.add_to(run_cmd);
  run_cmd->add_option("--grid", run.grid, "tiles per side (Cholesky, GEMM) or leaves (TSQR)");
  run_cmd->add_option("--block", run.block, "tile edge in scalars")->check(CLI::PositiveNumber);
  run_cmd->add_option("--size", run.size, "matrix edge in scalars (derives the grid)");
  run_cmd->add_option("--inner", run.inner, "GEMM inner dimension in scalars");
  run_cmd->add_option("--leaves", run.leaves, "TSQR row blocks (power of two)");
  run_cmd->add_option("--rows", run.rows, "TSQR rows");
  run_cmd->add_option("--cols", run.cols, "TSQR columns");
  run_cmd->add_option("--backend", run.backend, "object store: mem or fs")->check(CLI::IsMember({"mem", "fs"}));
  run_cmd->add_option("--root", run.root, "directory for the fs backend");
  run_cmd->add_option("--store-latency-ms", run.store_latency_ms, "injected latency per store operation");
  run_cmd->add_option("--store-bandwidth", run.store_bandwidth, "injected bandwidth limit, bytes/s (0 = none)");
  auto* workers = run_cmd->add_option("--workers", run.workers, "fixed pool size (default 4)")->check(CLI::PositiveNumber);
  auto* autoscale = run_cmd->add_option("--autoscale", run.autoscale, "queue-driven pool: sf=F,period=S");
  workers->excludes(autoscale);
  run_cmd->add_option("--startup-latency", run.startup_latency, "worker boot time, seconds");
  run_cmd->add_option("--max-workers", run.max_workers, "autoscaling cap")->check(CLI::PositiveNumber);
  run_cmd->add_option("--pipeline", run.pipeline, "tasks in flight per worker")->check(CLI::PositiveNumber);
  run_cmd->add_option("--lease", run.lease, "lease length, seconds");
  run_cmd->add_option("--runtime-limit", run.runtime_limit, "worker lifetime limit, seconds");
  run_cmd->add_option("--idle-timeout", run.idle_timeout, "idle seconds before a worker exits");
  run_cmd->add_option("--fault", run.faults, "fault injection (repeatable): kill:F@P% | kill:F@Ts | stall:W:D@P% | "
                                             "crash:CUT@K | dup:*");
  run_cmd->add_option("--seed", run.seed, "input and fault seed");
  run_cmd->add_flag("--check", run.check, "verify the result against a dense oracle");
  run_cmd->add_option("--metrics", run.metrics, "write metrics CSVs to this directory");
  run_cmd->add_option("--max-wall", run.max_wall, "abort if not finished after this many seconds");

  AnalyzeArgs an;
  auto* an_cmd = app.add_subcommand("analyze", "children or parents of one node, by solving index equations");
  an.src.add_to(an_cmd);
  an_cmd->add_option("--node", an.node, "node as line:var=val,...")->required();
  auto* ch = an_cmd->add_flag("--children", an.children, "list the node's children");
  auto* pa = an_cmd->add_flag("--parents", an.parents, "list the node's parents");
  ch->excludes(pa);

  EnumerateArgs en;
  auto* en_cmd = app.add_subcommand("enumerate-dag", "brute-force enumeration of the whole task graph");
  en.src.add_to(en_cmd);
  en_cmd->add_flag("--nodes", en.nodes_only, "list nodes instead of edges");
  en_cmd->add_flag("--summary", en.summary, "print node and edge counts only");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench-analysis", "time implicit queries against full enumeration");
  bench_cmd->add_option("--builtin", bench.builtin, "program")->check(CLI::IsMember(lp::harness::builtin_names()));
  bench_cmd->add_option("--grids", bench.grids, "grid sizes")->delimiter(',');
  bench_cmd->add_option("--queries", bench.queries, "sampled nodes per grid")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed, "sampling seed");

  Source val;
  auto* val_cmd = app.add_subcommand("validate", "parse a program and check single assignment");
  val.add_to(val_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run);
    if (an_cmd->parsed()) return cmd_analyze(an);
    if (en_cmd->parsed()) return cmd_enumerate(en);
    if (bench_cmd->parsed()) return cmd_bench(bench);
    if (val_cmd->parsed()) return cmd_validate(val);
  } catch (const UsageError& e) {
    std::cerr << "lambdapack: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "lambdapack: " << e.what() << '\n';
    return kExitAbort;
  }
  return kExitUsage;
}
