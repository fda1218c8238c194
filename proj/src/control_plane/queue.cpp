#include "lambdapack/control_plane/queue.hpp"

#include "lambdapack/error.hpp"

namespace lambdapack::control_plane {

std::uint64_t InMemoryQueue::enqueue(const lang::NodeRef& node, const std::string& run_id) {
  std::lock_guard lock(mu_);
  if (closed_) throw QueueError("enqueue on closed queue");
  const std::uint64_t id = next_id_++;
  entries_.emplace(id, Entry{TaskMessage{id, node, run_id, clock_.now(), 0, 0}, 0, Time{0}});
  visible_.push_back(id);
  ++enqueued_;
  return id;
}

void InMemoryQueue::requeue_expired(Time now) {
  while (!leases_.empty() && leases_.begin()->first <= now) {
    const std::uint64_t id = leases_.begin()->second;
    leases_.erase(leases_.begin());
    auto& e = entries_.at(id);
    e.token = 0;
    visible_.push_back(id);
  }
}

std::optional<std::pair<TaskMessage, Receipt>> InMemoryQueue::receive(Duration visibility_timeout) {
  if (visibility_timeout.count() <= 0) throw QueueError("visibility timeout must be positive");
  std::lock_guard lock(mu_);
  const Time now = clock_.now();
  requeue_expired(now);
  if (visible_.empty()) return std::nullopt;
  const std::uint64_t id = visible_.front();
  visible_.pop_front();
  auto& e = entries_.at(id);
  e.token = next_token_++;
  e.expiry = now + visibility_timeout;
  if (++e.msg.delivery_count > 1) ++redeliveries_;
  ++deliveries_;
  leases_.emplace(e.expiry, id);
  return std::pair{e.msg, Receipt{id, e.token, e.expiry}};
}

Receipt InMemoryQueue::renew(const Receipt& r, Duration extension) {
  std::lock_guard lock(mu_);
  const Time now = clock_.now();
  requeue_expired(now);
  auto it = entries_.find(r.message_id);
  if (it == entries_.end() || it->second.token != r.token) {
    throw StaleReceiptError("lease on message " + std::to_string(r.message_id) + " has lapsed");
  }
  auto& e = it->second;
  leases_.erase({e.expiry, r.message_id});
  e.expiry = now + extension;
  leases_.emplace(e.expiry, r.message_id);
  return Receipt{r.message_id, r.token, e.expiry};
}

DeleteResult InMemoryQueue::remove(const Receipt& r) {
  std::lock_guard lock(mu_);
  requeue_expired(clock_.now());
  auto it = entries_.find(r.message_id);
  if (it == entries_.end()) {
    return deleted_.contains(r.message_id) ? DeleteResult::AlreadyDeleted : DeleteResult::Stale;
  }
  if (it->second.token != r.token) return DeleteResult::Stale;
  leases_.erase({it->second.expiry, r.message_id});
  entries_.erase(it);
  deleted_.insert(r.message_id);
  return DeleteResult::Deleted;
}

std::size_t InMemoryQueue::depth() {
  std::lock_guard lock(mu_);
  return entries_.size();
}

QueueStats InMemoryQueue::stats() {
  std::lock_guard lock(mu_);
  requeue_expired(clock_.now());
  return {visible_.size(), leases_.size(), enqueued_, deliveries_, redeliveries_};
}

void InMemoryQueue::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
}

bool InMemoryQueue::closed() {
  std::lock_guard lock(mu_);
  return closed_;
}

}  // namespace lambdapack::control_plane
