#include "lambdapack/control_plane/state_store.hpp"

#include <algorithm>
#include <functional>

#include "lambdapack/error.hpp"

namespace lambdapack::control_plane {

const char* to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::Unseen: return "unseen";
    case NodeStatus::Enqueued: return "enqueued";
    case NodeStatus::Done: return "done";
  }
  return "?";
}

InMemoryStateStore::Shard& InMemoryStateStore::shard_of(const lang::NodeRef& n) {
  std::size_t h = std::hash<int>{}(n.line);
  for (const auto& [k, v] : n.binding) h = h * 1000003u ^ std::hash<std::string>{}(k) ^ std::hash<std::int64_t>{}(v) * 31u;
  return shards_[h % kShards];
}

CompletionResult InMemoryStateStore::record_completion(const lang::NodeRef& node, std::span<const ChildInfo> children) {
  {
    Shard& s = shard_of(node);
    std::lock_guard lock(s.mu);
    NodeState& st = s.nodes[node];
    if (st.status == NodeStatus::Done) return {{}, true};
    st.status = NodeStatus::Done;
  }
  completed_.fetch_add(1);

  CompletionResult out;
  for (const auto& c : children) {
    Shard& s = shard_of(c.node);
    std::lock_guard lock(s.mu);
    NodeState& st = s.nodes[c.node];
    if (st.total_parents < 0) st.total_parents = c.total_parents;
    if (st.total_parents != c.total_parents) {
      throw Error("inconsistent parent count for " + c.node.to_string() + ": " + std::to_string(st.total_parents) +
                  " vs " + std::to_string(c.total_parents));
    }
    if (st.completed_parents >= st.total_parents) {
      throw Error("parent counter overflow for " + c.node.to_string());
    }
    // Readiness alone leaves the status alone; Enqueued is only set once the
    // caller has actually put the child on the queue.
    if (++st.completed_parents == st.total_parents) {
      out.newly_ready.push_back(c.node);
    }
  }
  return out;
}

void InMemoryStateStore::mark_enqueued(const lang::NodeRef& node) {
  Shard& s = shard_of(node);
  std::lock_guard lock(s.mu);
  NodeState& st = s.nodes[node];
  if (st.status == NodeStatus::Unseen) st.status = NodeStatus::Enqueued;
}

NodeState InMemoryStateStore::state(const lang::NodeRef& node) {
  Shard& s = shard_of(node);
  std::lock_guard lock(s.mu);
  auto it = s.nodes.find(node);
  return it == s.nodes.end() ? NodeState{} : it->second;
}

void InMemoryStateStore::mark_failed(const std::string& reason) {
  std::lock_guard lock(failure_mu_);
  if (!failure_) failure_ = reason;
}

std::optional<std::string> InMemoryStateStore::failure() {
  std::lock_guard lock(failure_mu_);
  return failure_;
}

std::string InMemoryStateStore::snapshot() {
  std::vector<std::pair<lang::NodeRef, NodeState>> all;
  for (auto& s : shards_) {
    std::lock_guard lock(s.mu);
    all.insert(all.end(), s.nodes.begin(), s.nodes.end());
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out;
  for (const auto& [n, st] : all) {
    out += n.to_string() + " " + to_string(st.status) + " " + std::to_string(st.completed_parents) + "/" +
           (st.total_parents < 0 ? std::string("?") : std::to_string(st.total_parents)) + "\n";
  }
  return out;
}

}  // namespace lambdapack::control_plane
