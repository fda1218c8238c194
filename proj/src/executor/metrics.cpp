#include "lambdapack/executor/metrics.hpp"

#include <fstream>

#include "lambdapack/error.hpp"

namespace lambdapack::executor {

const char* to_string(Phase p) {
  switch (p) {
    case Phase::Read: return "read";
    case Phase::Compute: return "compute";
    case Phase::Write: return "write";
    case Phase::Finalize: return "finalize";
  }
  return "?";
}

void MetricsSink::record(TaskEvent e) {
  std::lock_guard lock(mu_);
  events_.push_back(std::move(e));
}

std::vector<TaskEvent> MetricsSink::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

void MetricsSink::clear() {
  std::lock_guard lock(mu_);
  events_.clear();
}

double MetricsSink::core_seconds() const {
  std::lock_guard lock(mu_);
  double s = 0;
  for (const auto& e : events_)
    if (e.phase == Phase::Compute) s += e.t_end - e.t_start;
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_task_csv(const std::filesystem::path& path, const std::vector<TaskEvent>& events) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "run_id,node,phase,t_start,t_end,bytes_read,bytes_written,flops\n";
  out.precision(9);
  for (const auto& e : events) {
    out << csv_field(e.run_id) << ',' << csv_field(e.node) << ',' << to_string(e.phase) << ',' << std::fixed
        << e.t_start << ',' << e.t_end << ',' << e.bytes_read << ',' << e.bytes_written << ',' << e.flops << '\n';
  }
}

}  // namespace lambdapack::executor
