#include "lambdapack/provisioner/provisioner.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <string>

#include "lambdapack/error.hpp"

namespace lambdapack::provisioner {

namespace {

std::int64_t parse_int(std::string_view s, std::string_view whole) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw Error("not a number: '" + std::string(whole) + "'");
  }
  return v;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return a / b + ((a % b != 0) && ((a < 0) == (b < 0))); }

}  // namespace

namespace {

Rational parse_any_fraction(std::string_view text) {
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    const std::int64_t d = parse_int(text.substr(slash + 1), text);
    if (d == 0) throw Error("zero denominator in '" + std::string(text) + "'");
    return Rational(parse_int(text.substr(0, slash), text), d);
  }
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    std::string_view frac = text.substr(dot + 1);
    if (frac.size() > 15) throw Error("too many decimal places in '" + std::string(text) + "'");
    std::int64_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    std::string_view whole = text.substr(0, dot);
    const bool neg = !whole.empty() && whole[0] == '-';
    const std::int64_t w = whole.empty() || whole == "-" ? 0 : parse_int(whole, text);
    const std::int64_t f = frac.empty() ? 0 : parse_int(frac, text);
    return Rational(w) + Rational(neg ? -f : f, den);
  }
  return Rational(parse_int(text, text));
}

}  // namespace

Rational parse_fraction(std::string_view text) {
  const Rational r = parse_any_fraction(text);
  if (r.num() <= 0) throw Error("expected a positive fraction, got '" + std::string(text) + "'");
  return r;
}

std::int64_t target_workers(std::int64_t pending, const ScalingPolicy& policy) {
  if (policy.fixed_workers) return *policy.fixed_workers;
  if (pending <= 0) return 0;
  const Rational t = policy.sf * Rational(pending) / Rational(std::max(1, policy.pipeline_width));
  return ceil_div(t.num(), t.den());
}

std::int64_t desired_launches(std::int64_t pending, std::int64_t running, std::int64_t booting,
                              const ScalingPolicy& policy) {
  const std::int64_t have = running + booting;
  const std::int64_t want = std::max<std::int64_t>(0, target_workers(pending, policy) - have);
  const std::int64_t room = std::max<std::int64_t>(0, policy.max_workers - have);
  return std::min(want, room);
}

Provisioner::Provisioner(ScalingPolicy policy, Launcher& launcher, std::function<std::int64_t()> pending,
                         control_plane::Clock& clock)
    : policy_(policy), launcher_(launcher), pending_(std::move(pending)), clock_(clock) {
  if (policy_.max_workers < 1) throw Error("max_workers must be at least 1");
  if (policy_.period.count() <= 0) throw Error("provisioner period must be positive");
}

TimelineSample Provisioner::control_step() {
  last_step_ = clock_.now();
  const std::int64_t pending = pending_();
  const PoolCounts before = launcher_.counts();
  const std::int64_t n = desired_launches(pending, before.running, before.booting, policy_);
  if (n > 0) launcher_.launch(n);
  TimelineSample s{control_plane::seconds(*last_step_), pending, before.running, before.booting + n, n};
  timeline_.push_back(s);
  return s;
}

std::optional<TimelineSample> Provisioner::maybe_step() {
  if (last_step_ && clock_.now() - *last_step_ < policy_.period) return std::nullopt;
  return control_step();
}

void write_timeline_csv(const std::filesystem::path& path, const std::vector<TimelineSample>& samples) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "t,pending,running,booting\n";
  out.precision(6);
  for (const auto& s : samples) out << std::fixed << s.t << ',' << s.pending << ',' << s.running << ',' << s.booting << '\n';
}

}  // namespace lambdapack::provisioner
