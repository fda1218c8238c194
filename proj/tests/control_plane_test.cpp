#include <gtest/gtest.h>

#include <algorithm>
#include <thread>

#include "lambdapack/analysis/analyzer.hpp"
#include "lambdapack/control_plane/clock.hpp"
#include "lambdapack/control_plane/queue.hpp"
#include "lambdapack/control_plane/state_store.hpp"
#include "lambdapack/error.hpp"
#include "test_support.hpp"

namespace lambdapack::control_plane {
namespace {

using namespace std::chrono_literals;
using lang::NodeRef;
using testing::load_program;

NodeRef node(int line, std::int64_t i) { return NodeRef{line, {{"i", i}}}; }

std::vector<ChildInfo> children_info(const analysis::Analyzer& a, const NodeRef& n) {
  std::vector<ChildInfo> out;
  for (auto& c : a.children_of(n)) out.push_back({c, static_cast<int>(a.parents_of(c).size())});
  return out;
}

TEST(ManualClock, SleepersWakeOnAdvance) {
  ManualClock clock;
  std::atomic<bool> woke{false};
  std::thread t([&] {
    clock.sleep_for(100ms);
    woke = true;
  });
  std::this_thread::sleep_for(20ms);
  EXPECT_FALSE(woke);
  clock.advance(50ms);
  std::this_thread::sleep_for(20ms);
  EXPECT_FALSE(woke);
  clock.advance(50ms);
  t.join();
  EXPECT_TRUE(woke);
  EXPECT_EQ(clock.now(), Time(100ms));
}

TEST(Queue, FifoDelivery) {
  ManualClock clock;
  InMemoryQueue q(clock);
  q.enqueue(node(0, 1), "r");
  q.enqueue(node(0, 2), "r");
  auto a = q.receive(1s);
  auto b = q.receive(1s);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->first.node, node(0, 1));
  EXPECT_EQ(b->first.node, node(0, 2));
  EXPECT_FALSE(q.receive(1s));
  EXPECT_EQ(q.depth(), 2u);
  EXPECT_THROW(q.receive(0s), QueueError);
}

TEST(Queue, LeaseExpiryRedelivers) {
  ManualClock clock;
  InMemoryQueue q(clock);
  q.enqueue(node(0, 0), "r");
  auto first = q.receive(10s);
  ASSERT_TRUE(first);
  clock.advance(9s);
  EXPECT_FALSE(q.receive(10s));
  clock.advance(1s);
  auto second = q.receive(10s);
  ASSERT_TRUE(second);
  EXPECT_EQ(second->first.delivery_count, 2);
  EXPECT_NE(second->second.token, first->second.token);
  // The first delivery lost its lease: its receipt no longer works.
  EXPECT_EQ(q.remove(first->second), DeleteResult::Stale);
  EXPECT_THROW(q.renew(first->second, 10s), StaleReceiptError);
  EXPECT_EQ(q.remove(second->second), DeleteResult::Deleted);
  EXPECT_EQ(q.remove(second->second), DeleteResult::AlreadyDeleted);
  EXPECT_EQ(q.depth(), 0u);
  EXPECT_EQ(q.stats().redeliveries, 1u);
}

TEST(Queue, RenewalKeepsMessageInvisible) {
  ManualClock clock;
  InMemoryQueue q(clock);
  q.enqueue(node(0, 0), "r");
  auto d = q.receive(10s);
  Receipt r = d->second;
  for (int k = 0; k < 5; ++k) {
    clock.advance(8s);
    r = q.renew(r, 10s);
    EXPECT_FALSE(q.receive(10s));
  }
  EXPECT_EQ(r.expiry, Time(50s));
  EXPECT_EQ(q.remove(r), DeleteResult::Deleted);
}

TEST(Queue, ShortLeaseRedeliveryCount) {
  // A receiver that never deletes sees the message once per lapsed lease.
  ManualClock clock;
  InMemoryQueue q(clock);
  q.enqueue(node(0, 0), "r");
  int deliveries = 0;
  for (int step = 0; step < 100; ++step) {  // 1s in 10ms steps
    if (q.receive(100ms)) ++deliveries;
    clock.advance(10ms);
  }
  EXPECT_EQ(deliveries, 10);
}

TEST(Queue, CloseRejectsEnqueue) {
  InMemoryQueue q;
  q.close();
  EXPECT_TRUE(q.closed());
  EXPECT_THROW(q.enqueue(node(0, 0), "r"), QueueError);
}

TEST(Queue, ConcurrentConsumersSeeEachMessageOnce) {
  InMemoryQueue q;
  for (int i = 0; i < 400; ++i) q.enqueue(node(0, i), "r");
  std::mutex mu;
  std::vector<std::int64_t> seen;
  std::vector<std::thread> ts;
  for (int t = 0; t < 4; ++t)
    ts.emplace_back([&] {
      while (auto d = q.receive(60s)) {
        {
          std::lock_guard lock(mu);
          seen.push_back(d->first.node.binding.at("i"));
        }
        EXPECT_EQ(q.remove(d->second), DeleteResult::Deleted);
      }
    });
  for (auto& t : ts) t.join();
  std::sort(seen.begin(), seen.end());
  ASSERT_EQ(seen.size(), 400u);
  for (int i = 0; i < 400; ++i) EXPECT_EQ(seen[i], i);
}

TEST(StateStore, CholeskyFirstCompletion) {
  analysis::Analyzer a(load_program("cholesky"), {{"N", 2}});
  InMemoryStateStore s;
  const NodeRef chol0 = node(0, 0);
  auto r = s.record_completion(chol0, children_info(a, chol0));
  EXPECT_FALSE(r.already_done);
  ASSERT_EQ(r.newly_ready.size(), 1u);
  EXPECT_EQ(r.newly_ready[0], (NodeRef{1, {{"i", 0}, {"j", 1}}}));
  EXPECT_EQ(s.state(chol0).status, NodeStatus::Done);
  EXPECT_EQ(s.completed_count(), 1u);
  // Ready but not yet on the queue until the caller says so.
  EXPECT_EQ(s.state(r.newly_ready[0]).status, NodeStatus::Unseen);
  s.mark_enqueued(r.newly_ready[0]);
  EXPECT_EQ(s.state(r.newly_ready[0]).status, NodeStatus::Enqueued);

  auto again = s.record_completion(chol0, children_info(a, chol0));
  EXPECT_TRUE(again.already_done);
  EXPECT_TRUE(again.newly_ready.empty());
  EXPECT_EQ(s.completed_count(), 1u);
}

TEST(StateStore, TsqrLeavesFromDifferentPairs) {
  analysis::Analyzer a(load_program("tsqr"), {{"N", 4}});
  InMemoryStateStore s;
  EXPECT_TRUE(s.record_completion(node(0, 0), children_info(a, node(0, 0))).newly_ready.empty());
  EXPECT_TRUE(s.record_completion(node(0, 2), children_info(a, node(0, 2))).newly_ready.empty());
  auto r = s.record_completion(node(0, 1), children_info(a, node(0, 1)));
  ASSERT_EQ(r.newly_ready.size(), 1u);
  EXPECT_EQ(r.newly_ready[0], (NodeRef{1, {{"i", 0}, {"level", 0}}}));
  const auto st = s.state(NodeRef{1, {{"i", 2}, {"level", 0}}});
  EXPECT_EQ(st.completed_parents, 1);
  EXPECT_EQ(st.total_parents, 2);
}

TEST(StateStore, InconsistentTotalsRejected) {
  InMemoryStateStore s;
  std::vector<ChildInfo> c1{{node(1, 0), 2}};
  std::vector<ChildInfo> c2{{node(1, 0), 3}};
  s.record_completion(node(0, 0), c1);
  EXPECT_THROW(s.record_completion(node(0, 1), c2), Error);
}

TEST(StateStore, FailureFirstReasonWins) {
  InMemoryStateStore s;
  EXPECT_FALSE(s.failure());
  s.mark_failed("first");
  s.mark_failed("second");
  EXPECT_EQ(s.failure().value(), "first");
}

TEST(StateStore, SnapshotFormat) {
  InMemoryStateStore s;
  std::vector<ChildInfo> c{{node(1, 0), 2}};
  s.record_completion(node(0, 0), c);
  s.mark_enqueued(node(0, 1));
  EXPECT_EQ(s.snapshot(), "0:i=0 done 0/?\n0:i=1 enqueued 0/?\n1:i=0 unseen 1/2\n");
}

TEST(StateStore, ExactlyOneCompleterReadiesAChild) {
  // Many parents completing concurrently, some more than once: the child
  // must be reported ready exactly once.
  for (int round = 0; round < 20; ++round) {
    InMemoryStateStore s;
    constexpr int kParents = 32;
    const NodeRef child = node(9, 0);
    std::vector<ChildInfo> c{{child, kParents}};
    std::atomic<int> ready{0};
    std::vector<std::thread> ts;
    for (int t = 0; t < 8; ++t)
      ts.emplace_back([&, t] {
        for (int p = 0; p < kParents; ++p) {
          if ((p + t) % 3 == 0 || t == 0) ready += static_cast<int>(s.record_completion(node(0, p), c).newly_ready.size());
        }
      });
    for (auto& t : ts) t.join();
    EXPECT_EQ(ready.load(), 1);
    EXPECT_EQ(s.state(child).completed_parents, kParents);
    EXPECT_EQ(s.completed_count(), static_cast<std::uint64_t>(kParents));
  }
}

}  // namespace
}  // namespace lambdapack::control_plane
