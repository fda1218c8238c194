#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lambdapack/error.hpp"
#include "lambdapack/harness/faults.hpp"
#include "lambdapack/harness/programs.hpp"
#include "lambdapack/harness/run.hpp"
#include "lambdapack/harness/workload.hpp"
#include "lambdapack/lang/enumerate.hpp"
#include "lambdapack/lang/parser.hpp"
#include "test_support.hpp"

namespace lambdapack::harness {
namespace {

using namespace std::chrono_literals;
namespace fs = std::filesystem;

std::string with_param(std::string src, const std::string& name, std::int64_t v) {
  const std::string key = "param " + name + " = ";
  auto pos = src.find(key);
  auto end = src.find('\n', pos);
  return src.replace(pos, end - pos, key + std::to_string(v));
}

TEST(Programs, GeneratorsMatchShippedSources) {
  for (std::int64_t b : {1, 4, 9})
    EXPECT_TRUE(lang::structurally_equal(
        gen_cholesky(b), lang::parse_program(with_param(testing::read_program_source("cholesky"), "N", b))));
  for (std::int64_t n : {1, 8})
    EXPECT_TRUE(lang::structurally_equal(
        gen_tsqr(n), lang::parse_program(with_param(testing::read_program_source("tsqr"), "N", n))));
  auto gemm = with_param(with_param(testing::read_program_source("gemm"), "N", 3), "K", 4);
  EXPECT_TRUE(lang::structurally_equal(gen_gemm(3, 4), lang::parse_program(gemm)));
  EXPECT_THROW(gen_tsqr(6), Error);
  EXPECT_THROW(gen_gemm(2, 3), Error);
  EXPECT_THROW(gen_cholesky(0), Error);
}

TEST(Programs, BuiltinNodeCounts) {
  auto count = [](const lang::Program& p) { return lang::enumerate_nodes(p, lang::resolve_params(p, {})).size(); };
  EXPECT_EQ(count(gen_cholesky(4)), 20u);
  EXPECT_EQ(count(gen_tsqr(4)), 7u);
  EXPECT_EQ(count(gen_gemm(2, 2)), 4u * 2 + 4u);
}

TEST(Programs, BuiltinSource) {
  EXPECT_EQ(builtin_names(), (std::vector<std::string>{"cholesky", "tsqr", "gemm"}));
  EXPECT_EQ(builtin_source("cholesky"), testing::read_program_source("cholesky"));
  EXPECT_NE(builtin_source("cholesky", {{"N", 7}}).find("param N = 7\n"), std::string::npos);
  EXPECT_THROW(builtin_source("lu"), Error);
  EXPECT_THROW(builtin_source("cholesky", {{"Q", 1}}), Error);
}

TEST(Faults, Parsing) {
  auto plan = parse_faults({"kill:0.8@50%", "kill:0.25@1.5s", "stall:2:3@10%", "crash:after-write@3", "dup:*"});
  ASSERT_EQ(plan.kills.size(), 2u);
  EXPECT_DOUBLE_EQ(plan.kills[0].fraction, 0.8);
  EXPECT_DOUBLE_EQ(*plan.kills[0].when.progress, 0.5);
  EXPECT_DOUBLE_EQ(*plan.kills[1].when.seconds, 1.5);
  ASSERT_EQ(plan.stalls.size(), 1u);
  EXPECT_EQ(plan.stalls[0].worker, 2);
  EXPECT_DOUBLE_EQ(plan.stalls[0].seconds, 3);
  ASSERT_EQ(plan.crashes.size(), 1u);
  EXPECT_EQ(plan.crashes[0].cut, executor::CutPoint::AfterWrite);
  EXPECT_EQ(plan.crashes[0].nth, 3);
  EXPECT_TRUE(plan.duplicate_all);
  EXPECT_FALSE(plan.empty());
  EXPECT_TRUE(parse_faults({}).empty());
}

TEST(Faults, Rejections) {
  for (const char* bad : {"kill", "kill:0.5", "kill:1.5@10%", "kill:0.5@150%", "kill:0.5@10", "stall:1@10%",
                          "crash:after-lunch@1", "crash:after-read@0", "dup:3", "explode:1@1s", "kill:x@1s"})
    EXPECT_THROW(add_fault(*std::make_unique<FaultPlan>(), bad), Error) << bad;
}

TEST(Workload, Shapes) {
  auto c = make_workload({.kind = WorkloadKind::Cholesky, .block = 37, .size = 256}, 1);
  EXPECT_EQ(c->params().at("N"), 7);
  auto t = make_workload({.kind = WorkloadKind::Tsqr, .block = 64, .leaves = 8, .rows = 512, .cols = 16}, 1);
  EXPECT_EQ(t->params().at("N"), 8);
  EXPECT_THROW(make_workload({.kind = WorkloadKind::Tsqr, .leaves = 6}, 1), Error);
  auto g = make_workload({.kind = WorkloadKind::Gemm, .block = 8, .grid = 2, .inner = 32}, 1);
  EXPECT_EQ(g->params().at("K"), 4);
}

TEST(Workload, SpdAndGaussianAreSeeded) {
  EXPECT_EQ(spd_matrix(5, 3), spd_matrix(5, 3));
  EXPECT_FALSE(spd_matrix(5, 3) == spd_matrix(5, 4));
  const Tile a = spd_matrix(6, 1);
  EXPECT_EQ(a, a.transpose());
  EXPECT_EQ(gaussian_matrix(3, 4, 9), gaussian_matrix(3, 4, 9));
}

RunConfig quick(WorkloadSpec w, std::int64_t workers = 3) {
  RunConfig cfg;
  cfg.workload = w;
  cfg.fixed_workers = workers;
  cfg.policy.startup_latency = 0s;
  cfg.policy.period = 20ms;
  cfg.worker.lease_length = 1s;
  cfg.worker.poll_interval = 2ms;
  cfg.worker.idle_timeout = 5s;
  cfg.check = true;
  cfg.max_wall = 60s;
  return cfg;
}

TEST(Run, BuiltinsPassTheirChecks) {
  for (auto w : {WorkloadSpec{.kind = WorkloadKind::Cholesky, .block = 8, .grid = 4},
                 WorkloadSpec{.kind = WorkloadKind::Tsqr, .block = 16, .leaves = 8, .cols = 6},
                 WorkloadSpec{.kind = WorkloadKind::Gemm, .block = 5, .grid = 2, .inner = 20}}) {
    auto r = run(quick(w));
    EXPECT_EQ(r.status, RunStatus::Ok) << r.description << ": " << r.message;
    ASSERT_TRUE(r.check) << r.description;
    EXPECT_TRUE(r.check->ok) << r.description << " error " << r.check->error;
    EXPECT_EQ(r.completed_in_state, r.nodes) << r.description;
  }
}

TEST(Run, FilesystemBackendMatchesMemory) {
  const fs::path root = fs::temp_directory_path() / ("lambdapack-run-" + std::to_string(::getpid()));
  auto cfg = quick({.kind = WorkloadKind::Cholesky, .block = 6, .grid = 3});
  const auto mem = run(cfg);
  cfg.backend = store::Backend::Filesystem;
  cfg.store_root = root;
  const auto disk = run(cfg);
  ASSERT_EQ(disk.status, RunStatus::Ok) << disk.message;
  EXPECT_EQ(disk.output, mem.output);
  EXPECT_TRUE(fs::exists(root / "run-1" / "O" / "0_0.tile"));
  fs::remove_all(root);
}

TEST(Run, KillsDoNotChangeTheResult) {
  auto cfg = quick({.kind = WorkloadKind::Cholesky, .block = 8, .grid = 4}, 5);
  cfg.worker.lease_length = 200ms;
  cfg.worker.compute_delay = 5ms;
  const auto clean = run(cfg);
  ASSERT_EQ(clean.status, RunStatus::Ok);
  cfg.faults = parse_faults({"kill:0.8@50%"});
  for (std::uint64_t seed : {1, 2}) {
    cfg.seed = seed;
    auto faulty = run(cfg);
    ASSERT_EQ(faulty.status, RunStatus::Ok) << faulty.message;
    ASSERT_EQ(faulty.recoveries.size(), 1u);
    EXPECT_EQ(faulty.recoveries[0].killed, 4);
    EXPECT_TRUE(faulty.recoveries[0].restored_after);
    if (seed == 1) EXPECT_EQ(faulty.output, clean.output);
  }
}

TEST(Run, CrashAndDuplicateFaults) {
  for (auto cut : executor::kAllCutPoints) {
    auto cfg = quick({.kind = WorkloadKind::Cholesky, .block = 4, .grid = 3}, 2);
    cfg.worker.lease_length = 150ms;
    cfg.faults = parse_faults({std::string("crash:") + executor::to_string(cut) + "@2", "dup:*"});
    auto r = run(cfg);
    EXPECT_EQ(r.status, RunStatus::Ok) << executor::to_string(cut) << ": " << r.message;
    EXPECT_EQ(r.completed_in_state, r.nodes);
  }
}

TEST(Run, NumericalFailureAborts) {
  // S − A·Aᵀ with both inputs SPD of similar scale is far from positive definite.
  const fs::path p = fs::temp_directory_path() / "lambdapack-notspd.lp";
  std::ofstream(p) << "program bad\nmatrix A[1] input\nmatrix X[1]\nmatrix L[1] output\noutput L[0]\n"
                      "X[0] = syrk(A[0], A[1], A[1])\nL[0] = chol(X[0])\n";
  auto cfg = quick({.kind = WorkloadKind::Custom, .block = 4, .program_path = p});
  auto r = run(cfg);
  EXPECT_EQ(r.status, RunStatus::Aborted);
  EXPECT_NE(r.message.find("chol"), std::string::npos) << r.message;
  EXPECT_EQ(exit_code(r.status), 2);
  fs::remove(p);
}

TEST(Run, MetricsAccounting) {
  const fs::path dir = fs::temp_directory_path() / ("lambdapack-metrics-" + std::to_string(::getpid()));
  auto cfg = quick({.kind = WorkloadKind::Cholesky, .block = 8, .grid = 3});
  cfg.metrics_dir = dir;
  auto r = run(cfg);
  ASSERT_EQ(r.status, RunStatus::Ok);
  EXPECT_EQ(r.task_executions, r.nodes);  // no faults, no duplicates
  EXPECT_EQ(r.events.size(), 4 * r.nodes);
  EXPECT_EQ(r.bytes_written, r.store_stats.bytes_written);
  EXPECT_EQ(r.bytes_read, r.store_stats.bytes_read - 0);
  EXPECT_GT(r.core_seconds, 0);
  EXPECT_LE(r.core_seconds, r.worker_seconds);
  for (const char* f : {"tasks.csv", "timeline.csv", "workers.csv", "summary.csv", "state_snapshot.txt"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream in(dir / "tasks.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, r.events.size());
  fs::remove_all(dir);
}

TEST(Run, ExitCodes) {
  EXPECT_EQ(exit_code(RunStatus::Ok), 0);
  EXPECT_EQ(exit_code(RunStatus::CheckFailed), 1);
  EXPECT_EQ(exit_code(RunStatus::Aborted), 2);
}

}  // namespace
}  // namespace lambdapack::harness
