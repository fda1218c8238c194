#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

namespace lambdapack::executor {

enum class Phase { Read, Compute, Write, Finalize };
const char* to_string(Phase p);

/// One row of tasks.csv.
struct TaskEvent {
  std::string run_id;
  std::string node;
  Phase phase = Phase::Read;
  double t_start = 0;  // seconds on the run clock
  double t_end = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t flops = 0;
  int worker = -1;  // not part of the CSV row; used for per-worker totals
};

/// Collects task events from all workers. Thread-safe.
class MetricsSink {
 public:
  void record(TaskEvent e);
  std::vector<TaskEvent> events() const;
  void clear();

  /// Sum of compute-phase durations: the active-core-seconds figure.
  double core_seconds() const;

 private:
  mutable std::mutex mu_;
  std::vector<TaskEvent> events_;
};

/// Quote a CSV field if it contains a comma, quote or newline.
std::string csv_field(const std::string& s);

void write_task_csv(const std::filesystem::path& path, const std::vector<TaskEvent>& events);

}  // namespace lambdapack::executor
