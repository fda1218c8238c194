#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lambdapack/analysis/analyzer.hpp"
#include "lambdapack/error.hpp"
#include "lambdapack/provisioner/provisioner.hpp"
#include "lambdapack/provisioner/simulation.hpp"
#include "test_support.hpp"

namespace lambdapack::provisioner {
namespace {

using control_plane::ManualClock;

ScalingPolicy policy(Rational sf, int width = 1) {
  ScalingPolicy p;
  p.sf = sf;
  p.pipeline_width = width;
  return p;
}

TEST(DesiredLaunches, HandExamples) {
  EXPECT_EQ(desired_launches(100, 40, 0, policy({1, 2})), 10);
  EXPECT_EQ(desired_launches(100, 40, 10, policy({1, 2})), 0);
  EXPECT_EQ(desired_launches(0, 40, 0, policy({1, 2})), 0);
  EXPECT_EQ(desired_launches(100, 40, 0, policy({1, 2}, 2)), 0);  // target 25 < 40
  EXPECT_EQ(desired_launches(1, 0, 0, policy({1, 16})), 1);       // ceil keeps one worker alive
  EXPECT_EQ(desired_launches(3, 0, 0, policy({1, 1}, 2)), 2);
}

TEST(DesiredLaunches, CappedByMaxWorkers) {
  auto p = policy({1, 1});
  p.max_workers = 8;
  EXPECT_EQ(desired_launches(100, 3, 2, p), 3);
  EXPECT_EQ(desired_launches(100, 8, 0, p), 0);
  EXPECT_EQ(desired_launches(100, 9, 0, p), 0);
}

TEST(DesiredLaunches, MonotoneInPendingAndSf) {
  const Rational sfs[] = {{1, 16}, {1, 4}, {1, 2}, {1, 1}, {2, 1}};
  for (std::int64_t running = 0; running < 20; running += 7)
    for (std::int64_t pending = 0; pending < 200; ++pending)
      for (std::size_t k = 0; k < std::size(sfs); ++k) {
        const auto here = desired_launches(pending, running, 0, policy(sfs[k]));
        EXPECT_GE(desired_launches(pending + 1, running, 0, policy(sfs[k])), here);
        if (k + 1 < std::size(sfs)) EXPECT_GE(desired_launches(pending, running, 0, policy(sfs[k + 1])), here);
        EXPECT_GE(here, 0);
      }
}

TEST(DesiredLaunches, FixedPool) {
  auto p = policy({1, 2});
  p.fixed_workers = 4;
  EXPECT_EQ(target_workers(1000, p), 4);
  EXPECT_EQ(desired_launches(1000, 1, 1, p), 2);
  EXPECT_EQ(desired_launches(0, 0, 0, p), 4);
}

TEST(ParseFraction, Forms) {
  EXPECT_EQ(parse_fraction("0.5"), Rational(1, 2));
  EXPECT_EQ(parse_fraction("1/3"), Rational(1, 3));
  EXPECT_EQ(parse_fraction("2"), Rational(2, 1));
  EXPECT_EQ(parse_fraction("0.0625"), Rational(1, 16));
  EXPECT_THROW(parse_fraction("0"), Error);
  EXPECT_THROW(parse_fraction("-1"), Error);
  EXPECT_THROW(parse_fraction("1/0"), Error);
  EXPECT_THROW(parse_fraction("abc"), Error);
  EXPECT_THROW(parse_fraction(""), Error);
}

TEST(Provisioner, EquilibriumUnderConstantLoad) {
  // 40 pending tasks held steady, sf = 1/2: the pool settles at 20 within a
  // few periods and never overshoots.
  ManualClock clock;
  auto p = policy({1, 2});
  p.period = 1s;
  p.startup_latency = 2s;
  SimulatedPool pool(clock, p.startup_latency);
  Provisioner prov(p, pool, [] { return 40; }, clock);
  for (int period = 0; period < 10; ++period) {
    prov.control_step();
    auto c = pool.counts();
    EXPECT_LE(c.running + c.booting, 20);
    if (period >= 5) EXPECT_NEAR(static_cast<double>(c.running), 20.0, 1.0) << "period " << period;
    clock.advance(p.period);
  }
  EXPECT_EQ(pool.members().size(), 20u);
  ASSERT_EQ(prov.timeline().size(), 10u);
  EXPECT_EQ(prov.timeline()[0].launched, 20);
  EXPECT_EQ(prov.timeline()[1].launched, 0);
}

TEST(Provisioner, MaybeStepHonoursPeriod) {
  ManualClock clock;
  auto p = policy({1, 1});
  p.period = std::chrono::milliseconds(500);
  SimulatedPool pool(clock, 0s);
  std::int64_t pending = 3;
  Provisioner prov(p, pool, [&] { return pending; }, clock);
  EXPECT_TRUE(prov.maybe_step());
  pending = 10;
  clock.advance(std::chrono::milliseconds(200));
  EXPECT_FALSE(prov.maybe_step());
  clock.advance(std::chrono::milliseconds(300));
  auto s = prov.maybe_step();
  ASSERT_TRUE(s);
  EXPECT_EQ(s->launched, 7);
}

TEST(Provisioner, TimelineCsv) {
  const auto path = std::filesystem::temp_directory_path() / "lambdapack-timeline-test.csv";
  write_timeline_csv(path, {{0.0, 5, 1, 2, 3}, {1.0, 4, 3, 0, 0}});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,pending,running,booting");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
  std::filesystem::remove(path);
}

TEST(Simulation, DeterministicAndComplete) {
  analysis::Analyzer a(testing::load_program("cholesky"), {{"N", 8}});
  SimConfig cfg;
  cfg.policy.startup_latency = 1s;
  cfg.idle_timeout = 2;
  const auto r1 = simulate_autoscaling(a, cfg);
  const auto r2 = simulate_autoscaling(a, cfg);
  EXPECT_EQ(r1.tasks, 8 + 28 + 84);
  EXPECT_GT(r1.completion_time, 0);
  EXPECT_EQ(r1.completion_time, r2.completion_time);
  EXPECT_EQ(r1.worker_seconds, r2.worker_seconds);
  EXPECT_EQ(r1.peak_workers, r2.peak_workers);
  // The critical path alone is 3N-2 task lengths.
  EXPECT_GE(r1.completion_time, (3 * 8 - 2) * cfg.task_seconds);
}

TEST(Simulation, ScalingFactorTradeOff) {
  analysis::Analyzer a(testing::load_program("cholesky"), {{"N", 16}});
  std::vector<SimResult> rs;
  for (Rational sf : {Rational(1, 16), Rational(1, 4), Rational(1, 2), Rational(1, 1)}) {
    SimConfig cfg;
    cfg.policy.sf = sf;
    cfg.policy.startup_latency = 2s;
    cfg.idle_timeout = 5;
    rs.push_back(simulate_autoscaling(a, cfg));
  }
  for (std::size_t k = 1; k < rs.size(); ++k) {
    EXPECT_LE(rs[k].completion_time, rs[k - 1].completion_time) << k;
    EXPECT_GE(rs[k].peak_workers, rs[k - 1].peak_workers) << k;
  }
  EXPECT_LT(rs.back().completion_time, rs.front().completion_time);
}

}  // namespace
}  // namespace lambdapack::provisioner
