#include "lambdapack/executor/worker.hpp"

#include <algorithm>

#include "lambdapack/error.hpp"
#include "lambdapack/kernels/kernels.hpp"

namespace lambdapack::executor {

using control_plane::Receipt;
using control_plane::TaskMessage;

const char* to_string(CutPoint c) {
  switch (c) {
    case CutPoint::AfterRead: return "after-read";
    case CutPoint::AfterCompute: return "after-compute";
    case CutPoint::AfterWrite: return "after-write";
    case CutPoint::AfterRecord: return "after-record";
    case CutPoint::AfterEnqueue: return "after-enqueue";
  }
  return "?";
}

const char* to_string(ExitReason r) {
  switch (r) {
    case ExitReason::Idle: return "idle";
    case ExitReason::RuntimeLimit: return "runtime-limit";
    case ExitReason::Killed: return "killed";
    case ExitReason::Stopped: return "stopped";
    case ExitReason::Aborted: return "aborted";
  }
  return "?";
}

bool should_self_terminate(const WorkerConfig& cfg, Duration elapsed, Duration idle, Duration headroom) {
  return elapsed >= cfg.runtime_limit - headroom || idle >= cfg.idle_timeout;
}

void enqueue_node(const Services& s, const lang::NodeRef& node) {
  s.queue.enqueue(node, s.run_id);
  s.state.mark_enqueued(node);
}

bool is_run_complete(store::ObjectStore& store, const std::string& run_id, const std::vector<lang::TileRef>& outputs) {
  return std::all_of(outputs.begin(), outputs.end(),
                     [&](const lang::TileRef& t) { return store.tile_exists({run_id, t.matrix, t.indices}); });
}

namespace {

std::uint64_t encoded_bytes(const Tile& t) { return store::kTileHeaderBytes + t.size() * sizeof(double); }

}  // namespace

Worker::Worker(int id, WorkerConfig cfg, Services services, FaultHooks hooks)
    : id_(id),
      cfg_(cfg),
      svc_(std::move(services)),
      hooks_(std::move(hooks)),
      clock_(svc_.clock ? *svc_.clock : control_plane::system_clock()) {
  if (cfg_.pipeline_width < 1) throw Error("pipeline width must be at least 1");
  if (cfg_.lease_length.count() <= 0) throw Error("lease length must be positive");
  if (cfg_.effective_renew_interval() >= cfg_.lease_length) throw Error("renew interval must be shorter than the lease");
  report_.worker = id;
}

Worker::~Worker() {
  if (!slots_.empty() || renewer_.joinable()) {
    kill();
    join();
  }
}

void Worker::start() {
  if (started_.exchange(true)) return;
  {
    std::lock_guard lock(mu_);
    start_time_ = last_found_ = clock_.now();
    report_.started = control_plane::seconds(start_time_);
  }
  active_slots_ = cfg_.pipeline_width;
  for (int s = 0; s < cfg_.pipeline_width; ++s) slots_.emplace_back([this, s] { slot_loop(s); });
  renewer_ = std::thread([this] { renew_loop(); });
}

void Worker::kill() {
  killed_ = true;
  cv_.notify_all();
}

void Worker::stop() {
  stopping_ = true;
  cv_.notify_all();
}

void Worker::stall(Duration d) {
  stalled_until_ns_ = (clock_.now() + d).count();
}

void Worker::join() {
  for (auto& t : slots_)
    if (t.joinable()) t.join();
  if (renewer_.joinable()) renewer_.join();
}

std::size_t Worker::in_flight() const {
  std::lock_guard lock(mu_);
  return held_.size();
}

WorkerReport Worker::report() const {
  std::lock_guard lock(mu_);
  WorkerReport r = report_;
  if (exit_reason_) r.reason = *exit_reason_;
  return r;
}

double Worker::now_s() const { return control_plane::seconds(clock_.now()); }

void Worker::check_alive() const {
  if (killed_) throw Killed{};
}

void Worker::maybe_crash(const TaskMessage& msg, CutPoint cut) {
  check_alive();
  if (hooks_.crash_after && hooks_.crash_after(id_, msg, cut)) {
    kill();
    throw Killed{};
  }
}

bool Worker::interruptible_sleep(Duration d) {
  const auto deadline = clock_.now() + d;
  while (!killed_) {
    const auto left = deadline - clock_.now();
    if (left.count() <= 0) return true;
    clock_.sleep_for(std::min<Duration>(left, 5ms));
  }
  return false;
}

void Worker::wait_while_stalled() {
  while (clock_.now().count() < stalled_until_ns_.load()) {
    check_alive();
    clock_.sleep_for(1ms);
  }
}

Receipt Worker::current_receipt(int slot) {
  std::lock_guard lock(mu_);
  return held_.at(slot).receipt;
}

Duration Worker::p95_task_time() const {
  std::lock_guard lock(mu_);
  if (task_times_.empty()) return Duration{0};
  auto v = task_times_;
  const std::size_t k = (v.size() * 95 + 99) / 100 - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(k), v.end());
  return v[k];
}

void Worker::finish_with(ExitReason r) {
  {
    std::lock_guard lock(mu_);
    if (!exit_reason_) exit_reason_ = r;
  }
  stopping_ = true;
}

void Worker::slot_loop(int slot) {
  try {
    while (true) {
      check_alive();
      if (svc_.state.failure()) {
        finish_with(ExitReason::Aborted);
        break;
      }
      if (stopping_) {
        finish_with(ExitReason::Stopped);
        break;
      }
      const auto now = clock_.now();
      Duration idle{0};
      Duration elapsed{0};
      {
        std::lock_guard lock(mu_);
        if (held_.empty()) idle = now - last_found_;
        elapsed = now - start_time_;
      }
      // Leave room for one more slow task before the hard limit.
      if (should_self_terminate(cfg_, elapsed, Duration{0}, 2 * p95_task_time())) {
        finish_with(ExitReason::RuntimeLimit);
        break;
      }
      if (should_self_terminate(cfg_, Duration{0}, idle)) {
        finish_with(ExitReason::Idle);
        break;
      }

      auto got = svc_.queue.receive(cfg_.lease_length);
      if (!got) {
        interruptible_sleep(cfg_.poll_interval);
        continue;
      }
      {
        std::lock_guard lock(mu_);
        last_found_ = now;
        held_[slot] = Held{got->first, got->second};
      }
      const auto t0 = clock_.now();
      const bool done = run_task(got->first, slot);
      std::lock_guard lock(mu_);
      held_.erase(slot);
      last_found_ = clock_.now();
      if (done) task_times_.push_back(last_found_ - t0);
    }
  } catch (const Killed&) {
    finish_with(ExitReason::Killed);
  } catch (const std::exception& e) {
    svc_.state.mark_failed("worker " + std::to_string(id_) + ": " + e.what());
    finish_with(ExitReason::Aborted);
  }
  std::lock_guard lock(mu_);
  if (--active_slots_ == 0) {
    report_.finished = now_s();
    finished_ = true;
    cv_.notify_all();
  }
}

void Worker::renew_loop() {
  const Duration interval = cfg_.effective_renew_interval();
  const long cap = cfg_.max_renewals();
  std::unique_lock lock(mu_);
  while (true) {
    cv_.wait_for(lock, interval, [&] { return finished_.load() || killed_.load(); });
    if (finished_ || killed_) return;
    // A stalled worker is frozen as a whole; its leases lapse like a straggler's.
    if (clock_.now().count() < stalled_until_ns_.load()) continue;
    for (auto& [slot, h] : held_) {
      if (h.lost || h.renewals >= cap) continue;
      try {
        h.receipt = svc_.queue.renew(h.receipt, cfg_.lease_length);
        ++h.renewals;
      } catch (const StaleReceiptError&) {
        h.lost = true;
      }
    }
  }
}

bool Worker::execute_task(const TaskMessage& msg, Receipt receipt) {
  int slot;
  {
    std::lock_guard lock(mu_);
    slot = next_direct_slot_--;
    held_[slot] = Held{msg, receipt};
  }
  bool done = false;
  try {
    done = run_task(msg, slot);
  } catch (const Killed&) {
  }
  std::lock_guard lock(mu_);
  held_.erase(slot);
  return done;
}

bool Worker::run_task(const TaskMessage& msg, int slot) {
  const auto& an = svc_.analyzer;
  const lang::NodeRef& node = msg.node;
  const std::string node_s = node.to_string();
  auto event = [&](Phase p, double t0, std::uint64_t in, std::uint64_t out, std::uint64_t flops) {
    if (svc_.metrics) svc_.metrics->record({svc_.run_id, node_s, p, t0, now_s(), in, out, flops, id_});
  };
  auto key = [&](const lang::TileRef& t) { return store::TileKey{svc_.run_id, t.matrix, t.indices}; };

  if (node.line < 0 || node.line >= static_cast<int>(an.lines().size()) || !an.verify_binding(node.line, node.binding)) {
    svc_.state.mark_failed("task " + node_s + " is not a node of the program");
    return false;
  }
  const lang::KernelCall& call = *an.line(node.line).call;
  const auto scope = an.scope_of(node);

  // Read
  double t0 = now_s();
  std::vector<Tile> inputs;
  std::uint64_t bytes_in = 0;
  for (const auto& t : an.reads_of(node)) {
    check_alive();
    try {
      inputs.push_back(svc_.store.get_tile(key(t)));
    } catch (const MissingKeyError& e) {
      // Usually a race with a duplicate; let the lease lapse and retry later.
      if (msg.delivery_count >= cfg_.missing_input_delivery_cap) {
        svc_.state.mark_failed("task " + node_s + " still missing input after " + std::to_string(msg.delivery_count) +
                               " deliveries: " + e.what());
      }
      std::lock_guard lock(mu_);
      held_.at(slot).lost = true;
      return false;
    }
    bytes_in += encoded_bytes(inputs.back());
  }
  event(Phase::Read, t0, bytes_in, 0, 0);
  maybe_crash(msg, CutPoint::AfterRead);

  // Compute
  std::vector<Tile> outputs;
  std::uint64_t flops = 0;
  {
    std::lock_guard core(core_mu_);
    wait_while_stalled();
    check_alive();
    t0 = now_s();
    std::vector<lang::Value> scalars;
    for (const auto& s : call.scalars) scalars.push_back(lang::eval_scalar(*s, scope));
    try {
      outputs = kernels::run(call.kernel, inputs, scalars);
    } catch (const NumericalError& e) {
      svc_.state.mark_failed("kernel " + call.kernel + " failed at " + node_s + ": " + e.what());
      return false;
    } catch (const ShapeError& e) {
      svc_.state.mark_failed("kernel " + call.kernel + " failed at " + node_s + ": " + e.what());
      return false;
    }
    if (cfg_.compute_delay.count() > 0) interruptible_sleep(cfg_.compute_delay);
    flops = kernels::flop_count(call.kernel, inputs);
    event(Phase::Compute, t0, 0, 0, flops);
  }
  maybe_crash(msg, CutPoint::AfterCompute);

  // Write
  t0 = now_s();
  std::uint64_t bytes_out = 0;
  const auto writes = an.writes_of(node);
  for (std::size_t i = 0; i < writes.size(); ++i) {
    check_alive();
    try {
      svc_.store.put_tile(key(writes[i]), outputs.at(i));
    } catch (const SsaViolation& e) {
      svc_.state.mark_failed(std::string("non-deterministic re-execution of ") + node_s + ": " + e.what());
      return false;
    }
    bytes_out += encoded_bytes(outputs[i]);
  }
  event(Phase::Write, t0, 0, bytes_out, 0);
  maybe_crash(msg, CutPoint::AfterWrite);

  // Finalize: record, enqueue ready children, then acknowledge.
  t0 = now_s();
  const auto children = an.children_of(node);
  std::vector<control_plane::ChildInfo> infos;
  infos.reserve(children.size());
  for (const auto& c : children) infos.push_back({c, static_cast<int>(an.parents_of(c).size())});
  auto result = svc_.state.record_completion(node, infos);
  maybe_crash(msg, CutPoint::AfterRecord);

  std::vector<lang::NodeRef> ready = std::move(result.newly_ready);
  if (result.already_done) {
    // A previous delivery may have died between recording and enqueuing;
    // re-enqueue ready children nobody confirmed putting on the queue. A race
    // with a live delivery only costs a harmless duplicate.
    for (const auto& c : children) {
      auto st = svc_.state.state(c);
      if (st.status == control_plane::NodeStatus::Unseen && st.total_parents >= 0 &&
          st.completed_parents == st.total_parents) {
        ready.push_back(c);
      }
    }
  }
  for (const auto& c : ready) {
    enqueue_node(svc_, c);
    if (hooks_.duplicate_enqueue && hooks_.duplicate_enqueue(c)) enqueue_node(svc_, c);
  }
  maybe_crash(msg, CutPoint::AfterEnqueue);

  svc_.queue.remove(current_receipt(slot));  // a stale receipt means another delivery owns it; fine
  event(Phase::Finalize, t0, 0, 0, 0);
  std::lock_guard lock(mu_);
  ++report_.tasks_completed;
  report_.bytes_read += bytes_in;
  report_.bytes_written += bytes_out;
  return true;
}

}  // namespace lambdapack::executor
