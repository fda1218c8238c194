#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lambdapack/lang/ast.hpp"

namespace lambdapack::analysis {

/// Exact rational with 64-bit numerator/denominator; overflow throws EvalError.
class Rational {
 public:
  Rational() = default;
  Rational(std::int64_t n) : num_(n) {}  // NOLINT(google-explicit-constructor)
  Rational(std::int64_t n, std::int64_t d);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  bool is_integer() const { return den_ == 1; }
  bool is_zero() const { return num_ == 0; }

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  Rational operator-() const;
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }

  friend bool operator==(const Rational& a, const Rational& b) = default;

  std::string to_string() const;

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// sum(coeff[v] * v) + constant, over loop variables still unknown.
struct Affine {
  std::map<std::string, Rational, std::less<>> coeffs;
  Rational constant;

  bool is_constant() const { return coeffs.empty(); }
};

/// One equation per index dimension: `symbolic == value`.
struct IndexEquation {
  lang::ExprPtr symbolic;
  std::int64_t value;
};

struct IndexSystem {
  /// Loop variables of the candidate line, outermost first.
  std::vector<std::string> unknowns;
  std::vector<IndexEquation> equations;
  /// Program parameters plus any variables already fixed by the caller.
  lang::Binding context;
};

enum class SolveStatus { Unique, None, Underdetermined };

struct CandidateSolution {
  /// Values for the unknowns that could be determined (all of them when Unique).
  lang::Binding binding;
  SolveStatus status = SolveStatus::None;
};

/// Solves affine equations exactly over the rationals, rejects non-integral
/// solutions, substitutes into the remaining equations (including terms of the
/// form c * base**(affine)) and repeats to a fixpoint. Unknowns left free are
/// reported as Underdetermined; the caller enumerates them over their ranges.
CandidateSolution solve_index_system(const IndexSystem& sys);

namespace detail {

/// Affine part plus `coeff * base**exponent` terms.
struct PowTerm {
  Rational coeff;
  std::int64_t base;
  Affine exponent;
};

struct Decomposed {
  Affine affine;
  std::vector<PowTerm> pows;
};

enum class DecomposeStatus { Ok, NonAffine, Invalid };

/// Rewrites `e` in terms of the unknowns; subexpressions free of unknowns are
/// evaluated under `known`. Invalid means a known subexpression failed to
/// evaluate to an integer (so no integer solution can exist).
std::pair<DecomposeStatus, Decomposed> decompose(const lang::Expr& e, const lang::Binding& known,
                                                 const std::vector<std::string>& unknowns);

}  // namespace detail

}  // namespace lambdapack::analysis
