#include "lambdapack/provisioner/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include "lambdapack/error.hpp"
#include "lambdapack/lang/enumerate.hpp"

namespace lambdapack::provisioner {

using control_plane::seconds;

PoolCounts SimulatedPool::counts() {
  const double now = seconds(clock_.now());
  PoolCounts c;
  for (const auto& m : members_) {
    if (m.exited_at >= 0) continue;
    (m.ready_at <= now ? c.running : c.booting)++;
  }
  return c;
}

void SimulatedPool::launch(std::int64_t n) {
  const double now = seconds(clock_.now());
  const double ready = now + seconds(startup_latency_);
  for (std::int64_t i = 0; i < n; ++i) members_.push_back({now, ready, -1, ready, {}});
}

double SimulatedPool::worker_seconds(double now) const {
  double s = 0;
  for (const auto& m : members_) s += (m.exited_at >= 0 ? m.exited_at : now) - m.launched_at;
  return s;
}

SimResult simulate_autoscaling(const analysis::Analyzer& analyzer, const SimConfig& cfg) {
  if (cfg.dt <= 0 || cfg.task_seconds <= 0) throw Error("simulation step and task time must be positive");
  const auto nodes = lang::enumerate_nodes(analyzer.program(), analyzer.params());

  std::map<lang::NodeRef, int> waiting;  // remaining parents
  std::deque<lang::NodeRef> queue;
  for (const auto& n : nodes) {
    const int p = static_cast<int>(analyzer.parents_of(n).size());
    if (p == 0) queue.push_back(n);
    else waiting[n] = p;
  }

  control_plane::ManualClock clock;
  SimulatedPool pool(clock, cfg.policy.startup_latency);
  std::int64_t in_flight = 0;
  Provisioner prov(cfg.policy, pool, [&] { return static_cast<std::int64_t>(queue.size()) + in_flight; }, clock);
  const int width = std::max(1, cfg.policy.pipeline_width);

  // Tasks in flight, keyed by finish time so completions are processed in a fixed order.
  std::multimap<double, lang::NodeRef> running_tasks;
  SimResult r;
  std::size_t done = 0;
  double t = 0;
  auto tick = [&] {
    t += cfg.dt;
    clock.set(std::chrono::duration_cast<Duration>(std::chrono::duration<double>(t)));
  };

  prov.control_step();
  while (true) {
    tick();
    if (t > cfg.max_seconds) throw Error("simulation did not finish");

    while (!running_tasks.empty() && running_tasks.begin()->first <= t + 1e-9) {
      const lang::NodeRef n = running_tasks.begin()->second;
      running_tasks.erase(running_tasks.begin());
      --in_flight;
      ++done;
      for (const auto& c : analyzer.children_of(n))
        if (--waiting.at(c) == 0) queue.push_back(c);
    }
    for (auto& m : pool.members()) {
      if (m.exited_at >= 0 || m.ready_at > t + 1e-9) continue;
      std::erase_if(m.busy_until, [&](double u) { return u <= t + 1e-9; });
      while (static_cast<int>(m.busy_until.size()) < width && !queue.empty()) {
        const double until = t + cfg.task_seconds;
        running_tasks.emplace(until, queue.front());
        queue.pop_front();
        m.busy_until.push_back(until);
        ++in_flight;
      }
      if (!m.busy_until.empty()) {
        m.idle_since = *std::max_element(m.busy_until.begin(), m.busy_until.end());
      } else if (t - m.idle_since >= cfg.idle_timeout - 1e-9) {
        m.exited_at = t;
      }
    }
    const bool finished = done == nodes.size();
    if (finished && r.completion_time == 0) r.completion_time = t;
    if (!finished) {
      if (auto s = prov.maybe_step()) r.peak_workers = std::max(r.peak_workers, s->running + s->booting);
    }
    const auto c = pool.counts();
    if (finished && c.running == 0 && c.booting == 0) break;
  }
  r.worker_seconds = pool.worker_seconds(t);
  r.tasks = static_cast<std::int64_t>(done);
  r.timeline = prov.timeline();
  return r;
}

}  // namespace lambdapack::provisioner
