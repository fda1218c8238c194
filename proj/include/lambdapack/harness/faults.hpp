#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lambdapack/control_plane/clock.hpp"
#include "lambdapack/executor/worker.hpp"

namespace lambdapack::harness {

/// When a fault fires: after a fraction of the program's tasks have
/// completed, or at a time since the run started.
struct Trigger {
  std::optional<double> progress;  // in [0, 1]
  std::optional<double> seconds;
};

struct KillEvent {
  Trigger when;
  double fraction = 0;  // of running workers
};

struct StallEvent {
  Trigger when;
  int worker = 0;  // launch order
  double seconds = 0;
};

/// Kill whichever worker is the `nth` (1-based) to pass `cut`.
struct CrashEvent {
  executor::CutPoint cut = executor::CutPoint::AfterRead;
  std::int64_t nth = 1;
};

struct FaultPlan {
  std::vector<KillEvent> kills;
  std::vector<StallEvent> stalls;
  std::vector<CrashEvent> crashes;
  /// Enqueue every ready task twice (roots included).
  bool duplicate_all = false;

  bool empty() const { return kills.empty() && stalls.empty() && crashes.empty() && !duplicate_all; }
};

/// Parse one --fault specification and add it to `plan`:
///   kill:F@P%          kill fraction F of running workers at P% task completion
///   kill:F@Ts          ... T seconds into the run
///   stall:W:D@P% | @Ts stall worker W for D seconds
///   crash:CUT@K        kill the K-th worker to pass CUT (after-read, after-compute,
///                      after-write, after-record, after-enqueue)
///   dup:*              duplicate every enqueue
/// Throws Error on malformed input.
void add_fault(FaultPlan& plan, std::string_view spec);
FaultPlan parse_faults(const std::vector<std::string>& specs);

executor::CutPoint parse_cut_point(std::string_view name);

}  // namespace lambdapack::harness
