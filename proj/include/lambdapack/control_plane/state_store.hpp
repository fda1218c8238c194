#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lambdapack/lang/ast.hpp"

namespace lambdapack::control_plane {

enum class NodeStatus { Unseen, Enqueued, Done };
const char* to_string(NodeStatus s);

struct NodeState {
  int completed_parents = 0;
  int total_parents = -1;  // unknown until first touched
  NodeStatus status = NodeStatus::Unseen;
};

struct ChildInfo {
  lang::NodeRef node;
  int total_parents = 0;
};

struct CompletionResult {
  /// Children whose last parent this call completed. Each child appears in
  /// exactly one result across all calls.
  std::vector<lang::NodeRef> newly_ready;
  /// The node had already been recorded; nothing changed.
  bool already_done = false;
};

/// Runtime state for one run: per-node readiness counters and the done set.
/// Updates are atomic per node; there is no cross-node transaction.
class StateStore {
 public:
  virtual ~StateStore() = default;

  /// Mark `node` done and bump each child's parent counter. Idempotent.
  virtual CompletionResult record_completion(const lang::NodeRef& node, std::span<const ChildInfo> children) = 0;
  /// Note that a node has been put on the queue (roots, re-enqueues).
  virtual void mark_enqueued(const lang::NodeRef& node) = 0;
  virtual NodeState state(const lang::NodeRef& node) = 0;
  virtual std::uint64_t completed_count() = 0;

  /// A failed run stays failed; the first reason wins.
  virtual void mark_failed(const std::string& reason) = 0;
  virtual std::optional<std::string> failure() = 0;

  /// One line per touched node, `line:binding status completed/total`, sorted.
  virtual std::string snapshot() = 0;
};

class InMemoryStateStore final : public StateStore {
 public:
  CompletionResult record_completion(const lang::NodeRef& node, std::span<const ChildInfo> children) override;
  void mark_enqueued(const lang::NodeRef& node) override;
  NodeState state(const lang::NodeRef& node) override;
  std::uint64_t completed_count() override { return completed_.load(); }
  void mark_failed(const std::string& reason) override;
  std::optional<std::string> failure() override;
  std::string snapshot() override;

 private:
  // Nodes are spread over independently locked shards so concurrent
  // completions on unrelated nodes never contend.
  static constexpr std::size_t kShards = 64;
  struct Shard {
    std::mutex mu;
    std::map<lang::NodeRef, NodeState> nodes;
  };
  Shard& shard_of(const lang::NodeRef& n);

  std::array<Shard, kShards> shards_;
  std::atomic<std::uint64_t> completed_{0};
  std::mutex failure_mu_;
  std::optional<std::string> failure_;
};

}  // namespace lambdapack::control_plane
