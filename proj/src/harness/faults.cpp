#include "lambdapack/harness/faults.hpp"

#include <charconv>
#include <string>

#include "lambdapack/error.hpp"

namespace lambdapack::harness {

namespace {

double parse_double(std::string_view s, std::string_view spec) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw Error("bad number '" + std::string(s) + "' in fault '" + std::string(spec) + "'");
  }
  return v;
}

Trigger parse_trigger(std::string_view s, std::string_view spec) {
  Trigger t;
  if (s.ends_with('%')) {
    const double p = parse_double(s.substr(0, s.size() - 1), spec);
    if (p < 0 || p > 100) throw Error("progress out of range in fault '" + std::string(spec) + "'");
    t.progress = p / 100.0;
  } else if (s.ends_with('s')) {
    t.seconds = parse_double(s.substr(0, s.size() - 1), spec);
    if (*t.seconds < 0) throw Error("negative time in fault '" + std::string(spec) + "'");
  } else {
    throw Error("fault trigger must end in '%' or 's': '" + std::string(spec) + "'");
  }
  return t;
}

std::pair<std::string_view, std::string_view> split_at(std::string_view s, char c, std::string_view spec) {
  auto pos = s.find(c);
  if (pos == std::string_view::npos) throw Error("malformed fault '" + std::string(spec) + "'");
  return {s.substr(0, pos), s.substr(pos + 1)};
}

}  // namespace

executor::CutPoint parse_cut_point(std::string_view name) {
  for (auto c : executor::kAllCutPoints)
    if (name == executor::to_string(c)) return c;
  throw Error("unknown cut point '" + std::string(name) + "'");
}

void add_fault(FaultPlan& plan, std::string_view spec) {
  auto [kind, rest] = split_at(spec, ':', spec);
  if (kind == "dup") {
    if (rest != "*") throw Error("only 'dup:*' is supported");
    plan.duplicate_all = true;
  } else if (kind == "kill") {
    auto [frac, when] = split_at(rest, '@', spec);
    KillEvent e{parse_trigger(when, spec), parse_double(frac, spec)};
    if (e.fraction < 0 || e.fraction > 1) throw Error("kill fraction must be in [0,1]: '" + std::string(spec) + "'");
    plan.kills.push_back(e);
  } else if (kind == "stall") {
    auto [args, when] = split_at(rest, '@', spec);
    auto [worker, secs] = split_at(args, ':', spec);
    StallEvent e{parse_trigger(when, spec), static_cast<int>(parse_double(worker, spec)), parse_double(secs, spec)};
    if (e.worker < 0 || e.seconds <= 0) throw Error("bad stall fault '" + std::string(spec) + "'");
    plan.stalls.push_back(e);
  } else if (kind == "crash") {
    auto [cut, nth] = split_at(rest, '@', spec);
    CrashEvent e{parse_cut_point(cut), static_cast<std::int64_t>(parse_double(nth, spec))};
    if (e.nth < 1) throw Error("crash ordinal must be at least 1: '" + std::string(spec) + "'");
    plan.crashes.push_back(e);
  } else {
    throw Error("unknown fault kind '" + std::string(kind) + "'");
  }
}

FaultPlan parse_faults(const std::vector<std::string>& specs) {
  FaultPlan plan;
  for (const auto& s : specs) add_fault(plan, s);
  return plan;
}

}  // namespace lambdapack::harness
