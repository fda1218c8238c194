#include "lambdapack/analysis/solver.hpp"

#include <algorithm>
#include <numeric>

#include "lambdapack/error.hpp"
#include "lambdapack/lang/eval.hpp"

namespace lambdapack::analysis {

namespace {

std::int64_t narrow(__int128 v) {
  if (v > INT64_MAX || v < INT64_MIN) throw EvalError("rational overflow in index solver");
  return static_cast<std::int64_t>(v);
}

Rational make(__int128 n, __int128 d) {
  if (d == 0) throw EvalError("rational division by zero");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  __int128 a = n < 0 ? -n : n;
  __int128 b = d;
  while (b != 0) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    n /= a;
    d /= a;
  }
  return Rational(narrow(n), narrow(d));
}

}  // namespace

Rational::Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) {
  if (d == 0) throw EvalError("rational division by zero");
  if (d < 0 || std::gcd(n, d) != 1) *this = make(n, d);
}

Rational operator+(const Rational& a, const Rational& b) {
  return make(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
              static_cast<__int128>(a.den_) * b.den_);
}
Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }
Rational operator*(const Rational& a, const Rational& b) {
  return make(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
}
Rational operator/(const Rational& a, const Rational& b) {
  return make(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
}
Rational Rational::operator-() const { return make(-static_cast<__int128>(num_), den_); }

std::string Rational::to_string() const {
  return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
}

namespace detail {

namespace {

using lang::BinaryExpr;
using lang::BinaryOp;
using lang::Expr;

bool mentions(const Expr& e, const std::vector<std::string>& unknowns, const lang::Binding& known) {
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, lang::RefExpr>) {
          return !known.count(n.name) &&
                 std::find(unknowns.begin(), unknowns.end(), n.name) != unknowns.end();
        } else if constexpr (std::is_same_v<T, lang::BinaryExpr> || std::is_same_v<T, lang::CompareExpr>) {
          return mentions(*n.left, unknowns, known) || mentions(*n.right, unknowns, known);
        } else if constexpr (std::is_same_v<T, lang::UnaryExpr>) {
          return mentions(*n.operand, unknowns, known);
        } else if constexpr (std::is_same_v<T, lang::PowExpr>) {
          return mentions(*n.exponent, unknowns, known);
        } else {
          return false;
        }
      },
      e.node);
}

Affine scale(Affine a, const Rational& s) {
  for (auto it = a.coeffs.begin(); it != a.coeffs.end();) {
    it->second = it->second * s;
    if (it->second.is_zero()) {
      it = a.coeffs.erase(it);
    } else {
      ++it;
    }
  }
  a.constant = a.constant * s;
  return a;
}

Affine add(Affine a, const Affine& b, const Rational& sign) {
  for (const auto& [v, c] : b.coeffs) {
    auto& slot = a.coeffs[v];
    slot += c * sign;
    if (slot.is_zero()) a.coeffs.erase(v);
  }
  a.constant += b.constant * sign;
  return a;
}

Decomposed scale(Decomposed d, const Rational& s) {
  d.affine = scale(std::move(d.affine), s);
  for (auto& p : d.pows) p.coeff = p.coeff * s;
  std::erase_if(d.pows, [](const PowTerm& p) { return p.coeff.is_zero(); });
  return d;
}

bool is_plain_constant(const Decomposed& d) { return d.pows.empty() && d.affine.is_constant(); }

using Result = std::pair<DecomposeStatus, Decomposed>;

Result nonaffine() { return {DecomposeStatus::NonAffine, {}}; }
Result invalid() { return {DecomposeStatus::Invalid, {}}; }

Result rec(const Expr& e, const lang::Binding& known, const std::vector<std::string>& unknowns) {
  if (!mentions(e, unknowns, known)) {
    try {
      lang::Value v = lang::eval_scalar(e, known, lang::EvalMode::Index);
      if (const auto* i = std::get_if<std::int64_t>(&v)) {
        Decomposed d;
        d.affine.constant = Rational(*i);
        return {DecomposeStatus::Ok, std::move(d)};
      }
      return invalid();
    } catch (const EvalError&) {
      return invalid();
    }
  }
  if (const auto* r = std::get_if<lang::RefExpr>(&e.node)) {
    Decomposed d;
    d.affine.coeffs[r->name] = Rational(1);
    return {DecomposeStatus::Ok, std::move(d)};
  }
  if (const auto* u = std::get_if<lang::UnaryExpr>(&e.node)) {
    if (u->op != lang::UnaryOp::Neg) return nonaffine();
    auto [st, d] = rec(*u->operand, known, unknowns);
    if (st != DecomposeStatus::Ok) return {st, {}};
    return {DecomposeStatus::Ok, scale(std::move(d), Rational(-1))};
  }
  if (const auto* p = std::get_if<lang::PowExpr>(&e.node)) {
    auto [st, d] = rec(*p->exponent, known, unknowns);
    if (st != DecomposeStatus::Ok) return {st, {}};
    if (!d.pows.empty()) return nonaffine();
    Decomposed out;
    out.pows.push_back(PowTerm{Rational(1), p->base, std::move(d.affine)});
    return {DecomposeStatus::Ok, std::move(out)};
  }
  if (const auto* b = std::get_if<BinaryExpr>(&e.node)) {
    if (b->op != BinaryOp::Add && b->op != BinaryOp::Sub && b->op != BinaryOp::Mul &&
        b->op != BinaryOp::Div) {
      return nonaffine();
    }
    auto [ls, l] = rec(*b->left, known, unknowns);
    if (ls == DecomposeStatus::Invalid) return invalid();
    auto [rs, r] = rec(*b->right, known, unknowns);
    if (rs == DecomposeStatus::Invalid) return invalid();
    if (ls != DecomposeStatus::Ok || rs != DecomposeStatus::Ok) return nonaffine();
    switch (b->op) {
      case BinaryOp::Add:
      case BinaryOp::Sub: {
        Rational sign(b->op == BinaryOp::Add ? 1 : -1);
        l.affine = add(std::move(l.affine), r.affine, sign);
        for (auto& t : r.pows) {
          t.coeff = t.coeff * sign;
          l.pows.push_back(std::move(t));
        }
        return {DecomposeStatus::Ok, std::move(l)};
      }
      case BinaryOp::Mul:
        if (is_plain_constant(l)) return {DecomposeStatus::Ok, scale(std::move(r), l.affine.constant)};
        if (is_plain_constant(r)) return {DecomposeStatus::Ok, scale(std::move(l), r.affine.constant)};
        return nonaffine();
      case BinaryOp::Div:
        if (is_plain_constant(r)) {
          if (r.affine.constant.is_zero()) return invalid();
          return {DecomposeStatus::Ok, scale(std::move(l), Rational(1) / r.affine.constant)};
        }
        return nonaffine();
      default:
        return nonaffine();
    }
  }
  return nonaffine();
}

}  // namespace

std::pair<DecomposeStatus, Decomposed> decompose(const Expr& e, const lang::Binding& known,
                                                 const std::vector<std::string>& unknowns) {
  return rec(e, known, unknowns);
}

}  // namespace detail

namespace {

using detail::DecomposeStatus;
using detail::Decomposed;

struct Row {
  std::vector<Rational> coeffs;
  Rational rhs;  // sum coeffs * x = rhs
};

enum class Elim { Consistent, Inconsistent };

// Reduced row echelon form over the rationals; fills `determined` with
// variables pinned to a single value.
Elim eliminate(std::vector<Row>& rows, std::size_t nvars,
               std::vector<std::pair<std::size_t, Rational>>& determined) {
  std::size_t pivot_row = 0;
  std::vector<std::size_t> pivot_cols;
  for (std::size_t col = 0; col < nvars && pivot_row < rows.size(); ++col) {
    std::size_t sel = pivot_row;
    while (sel < rows.size() && rows[sel].coeffs[col].is_zero()) ++sel;
    if (sel == rows.size()) continue;
    std::swap(rows[sel], rows[pivot_row]);
    Rational inv = Rational(1) / rows[pivot_row].coeffs[col];
    for (auto& c : rows[pivot_row].coeffs) c = c * inv;
    rows[pivot_row].rhs = rows[pivot_row].rhs * inv;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r == pivot_row || rows[r].coeffs[col].is_zero()) continue;
      Rational f = rows[r].coeffs[col];
      for (std::size_t c = 0; c < nvars; ++c) {
        rows[r].coeffs[c] -= f * rows[pivot_row].coeffs[c];
      }
      rows[r].rhs -= f * rows[pivot_row].rhs;
    }
    pivot_cols.push_back(col);
    ++pivot_row;
  }
  for (std::size_t r = pivot_row; r < rows.size(); ++r) {
    if (!rows[r].rhs.is_zero()) return Elim::Inconsistent;
  }
  for (std::size_t r = 0; r < pivot_cols.size(); ++r) {
    std::size_t nonzero = 0;
    for (const auto& c : rows[r].coeffs) nonzero += !c.is_zero();
    if (nonzero == 1) determined.emplace_back(pivot_cols[r], rows[r].rhs);
  }
  return Elim::Consistent;
}

// Exact integer k with base**k == target, if any.
std::optional<std::int64_t> integer_log(std::int64_t base, const Rational& target) {
  if (!target.is_integer() || target.num() <= 0 || base < 2) return std::nullopt;
  std::int64_t t = target.num();
  std::int64_t k = 0;
  while (t % base == 0) {
    t /= base;
    ++k;
  }
  if (t != 1) return std::nullopt;
  return k;
}

enum class PowOutcome { NotApplicable, NoSolution, Solved };

// c * base**(p*v + q) + rest == 0 with `rest` free of unknowns.
PowOutcome solve_pow(const Decomposed& d, std::string& var, std::int64_t& value) {
  if (d.pows.size() != 1 || !d.affine.is_constant()) return PowOutcome::NotApplicable;
  const auto& term = d.pows.front();
  if (term.exponent.coeffs.size() != 1) return PowOutcome::NotApplicable;
  if (term.base < 2) return PowOutcome::NotApplicable;
  Rational target = -d.affine.constant / term.coeff;
  auto k = integer_log(term.base, target);
  if (!k) return PowOutcome::NoSolution;
  const auto& [v, p] = *term.exponent.coeffs.begin();
  Rational x = (Rational(*k) - term.exponent.constant) / p;
  if (!x.is_integer()) return PowOutcome::NoSolution;
  var = v;
  value = x.num();
  return PowOutcome::Solved;
}

}  // namespace

CandidateSolution solve_index_system(const IndexSystem& sys) {
  lang::Binding known = sys.context;
  auto unknown_left = [&] {
    std::vector<std::string> out;
    for (const auto& u : sys.unknowns) {
      if (!known.count(u)) out.push_back(u);
    }
    return out;
  };
  auto result = [&](SolveStatus st) {
    CandidateSolution s;
    s.status = st;
    if (st != SolveStatus::None) {
      for (const auto& u : sys.unknowns) {
        if (auto it = known.find(u); it != known.end()) s.binding[u] = it->second;
      }
    }
    return s;
  };

  for (;;) {
    auto unknowns = unknown_left();
    std::vector<Affine> affine;
    std::vector<Decomposed> nonlinear;
    for (const auto& eq : sys.equations) {
      auto [st, d] = detail::decompose(*eq.symbolic, known, unknowns);
      if (st == DecomposeStatus::Invalid) return result(SolveStatus::None);
      if (st == DecomposeStatus::NonAffine) continue;
      d.affine.constant -= Rational(eq.value);
      if (!d.pows.empty()) {
        nonlinear.push_back(std::move(d));
      } else if (d.affine.is_constant()) {
        if (!d.affine.constant.is_zero()) return result(SolveStatus::None);
      } else {
        affine.push_back(std::move(d.affine));
      }
    }

    bool progress = false;
    if (!affine.empty()) {
      std::vector<std::string> vars;
      for (const auto& a : affine) {
        for (const auto& [v, c] : a.coeffs) vars.push_back(v);
      }
      std::sort(vars.begin(), vars.end());
      vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
      std::vector<Row> rows;
      for (const auto& a : affine) {
        Row r{std::vector<Rational>(vars.size()), -a.constant};
        for (const auto& [v, c] : a.coeffs) {
          r.coeffs[std::lower_bound(vars.begin(), vars.end(), v) - vars.begin()] = c;
        }
        rows.push_back(std::move(r));
      }
      std::vector<std::pair<std::size_t, Rational>> determined;
      if (eliminate(rows, vars.size(), determined) == Elim::Inconsistent) {
        return result(SolveStatus::None);
      }
      for (const auto& [col, val] : determined) {
        if (!val.is_integer()) return result(SolveStatus::None);
        known[vars[col]] = val.num();
        progress = true;
      }
    }
    if (progress) continue;

    for (const auto& d : nonlinear) {
      std::string var;
      std::int64_t value = 0;
      switch (solve_pow(d, var, value)) {
        case PowOutcome::NoSolution:
          return result(SolveStatus::None);
        case PowOutcome::Solved:
          known[var] = value;
          progress = true;
          break;
        case PowOutcome::NotApplicable:
          break;
      }
      if (progress) break;
    }
    if (progress) continue;
    break;
  }

  if (!unknown_left().empty()) return result(SolveStatus::Underdetermined);
  // Equations the decomposition could not express (mod, floor, ...) are checked
  // once every unknown is fixed.
  for (const auto& eq : sys.equations) {
    try {
      if (lang::eval_int(*eq.symbolic, known, lang::EvalMode::Index) != eq.value) {
        return result(SolveStatus::None);
      }
    } catch (const EvalError&) {
      return result(SolveStatus::None);
    }
  }
  return result(SolveStatus::Unique);
}

}  // namespace lambdapack::analysis
