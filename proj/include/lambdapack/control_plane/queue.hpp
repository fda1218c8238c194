#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>

#include "lambdapack/control_plane/clock.hpp"
#include "lambdapack/lang/ast.hpp"

namespace lambdapack::control_plane {

struct TaskMessage {
  std::uint64_t id = 0;
  lang::NodeRef node;
  std::string run_id;
  Time enqueue_time{0};
  int delivery_count = 0;
  /// Unused by the FIFO queue; kept so a priority discipline can be tried.
  int priority = 0;
};

/// Lease handle. Each delivery gets a fresh token, so a receipt from an
/// earlier delivery can never act on a redelivered message.
struct Receipt {
  std::uint64_t message_id = 0;
  std::uint64_t token = 0;
  Time expiry{0};
};

enum class DeleteResult {
  Deleted,
  AlreadyDeleted,  // idempotent success
  Stale,           // lease expired; another delivery owns the message now
};

struct QueueStats {
  std::size_t visible = 0;
  std::size_t in_flight = 0;
  std::uint64_t enqueued = 0;
  std::uint64_t deliveries = 0;
  std::uint64_t redeliveries = 0;
};

/// At-least-once task queue with visibility-timeout leases.
class TaskQueue {
 public:
  virtual ~TaskQueue() = default;
  /// Throws QueueError once the queue is closed.
  virtual std::uint64_t enqueue(const lang::NodeRef& node, const std::string& run_id) = 0;
  /// The message stays invisible until the receipt expires or is deleted.
  virtual std::optional<std::pair<TaskMessage, Receipt>> receive(Duration visibility_timeout) = 0;
  /// Throws StaleReceiptError if the lease has already lapsed.
  virtual Receipt renew(const Receipt& r, Duration extension) = 0;
  virtual DeleteResult remove(const Receipt& r) = 0;
  /// Messages not yet deleted, visible or leased.
  virtual std::size_t depth() = 0;
  virtual QueueStats stats() = 0;
  virtual void close() = 0;
  virtual bool closed() = 0;
};

class InMemoryQueue final : public TaskQueue {
 public:
  explicit InMemoryQueue(Clock& clock = system_clock()) : clock_(clock) {}

  std::uint64_t enqueue(const lang::NodeRef& node, const std::string& run_id) override;
  std::optional<std::pair<TaskMessage, Receipt>> receive(Duration visibility_timeout) override;
  Receipt renew(const Receipt& r, Duration extension) override;
  DeleteResult remove(const Receipt& r) override;
  std::size_t depth() override;
  QueueStats stats() override;
  void close() override;
  bool closed() override;

 private:
  struct Entry {
    TaskMessage msg;
    std::uint64_t token = 0;  // 0 while visible
    Time expiry{0};
  };
  void requeue_expired(Time now);

  Clock& clock_;
  std::mutex mu_;
  std::map<std::uint64_t, Entry> entries_;
  std::deque<std::uint64_t> visible_;
  std::set<std::pair<Time, std::uint64_t>> leases_;  // (expiry, id)
  std::unordered_set<std::uint64_t> deleted_;
  std::uint64_t next_id_ = 1;
  std::uint64_t next_token_ = 1;
  std::uint64_t enqueued_ = 0, deliveries_ = 0, redeliveries_ = 0;
  bool closed_ = false;
};

}  // namespace lambdapack::control_plane
