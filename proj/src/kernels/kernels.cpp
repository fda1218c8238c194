#include "lambdapack/kernels/kernels.hpp"

#include <cmath>
#include <string>

#include "lambdapack/error.hpp"

namespace lambdapack::kernels {

namespace {

std::string shape(const Tile& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

void require_square(const Tile& t, const char* what) {
  if (t.rows() != t.cols()) throw ShapeError(std::string(what) + " must be square, got " + shape(t));
}

// Householder QR in place; returns R (cols×cols) with a nonnegative diagonal.
Tile householder_r(Tile a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> v(m);
  for (std::size_t k = 0; k < n; ++k) {
    double below = 0.0;
    for (std::size_t i = k + 1; i < m; ++i) below += a(i, k) * a(i, k);
    // Column already reduced: no reflector, so triangular inputs pass through exactly.
    if (below == 0.0) continue;
    const double norm = std::sqrt(a(k, k) * a(k, k) + below);
    const double alpha = a(k, k) > 0 ? -norm : norm;
    for (std::size_t i = k; i < m; ++i) v[i] = a(i, k);
    v[k] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < m; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    for (std::size_t j = k; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < m; ++i) dot += v[i] * a(i, j);
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = k; i < m; ++i) a(i, j) -= f * v[i];
    }
  }
  Tile r(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    // Flip row signs so the diagonal is nonnegative; this makes R unique.
    const double sign = a(i, i) < 0 ? -1.0 : 1.0;
    for (std::size_t j = i; j < n; ++j) r(i, j) = sign * a(i, j) + 0.0;  // + 0.0 drops -0
  }
  return r;
}

void require_upper_triangular(const Tile& r, const char* what) {
  require_square(r, what);
  const double tol = 1e-12 * std::max(1.0, r.max_abs());
  for (std::size_t i = 1; i < r.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(r(i, j)) > tol) throw ShapeError(std::string(what) + " is not upper-triangular");
}

}  // namespace

Tile chol(const Tile& a) {
  require_square(a, "chol input");
  const std::size_t n = a.rows();
  const double tol = 1e-12 * a.max_abs();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol) {
        throw NumericalError("chol input is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }

  Tile l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) {
      throw NumericalError("matrix is not positive definite: pivot " + std::to_string(j) + " is " + std::to_string(d),
                           static_cast<long>(j));
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Tile trsm(const Tile& l, const Tile& a) {
  require_square(l, "trsm triangle");
  const std::size_t n = l.rows();
  if (a.cols() != n) throw ShapeError("trsm: " + shape(a) + " panel does not conform to " + shape(l) + " triangle");
  for (std::size_t k = 0; k < n; ++k)
    if (l(k, k) == 0.0) throw NumericalError("trsm: zero on the diagonal at " + std::to_string(k), static_cast<long>(k));

  // Each row x of X solves L·xᵀ = aᵀ by forward substitution.
  Tile x(a.rows(), n);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* arow = a.row(r);
    double* xrow = x.row(r);
    for (std::size_t j = 0; j < n; ++j) {
      double s = arow[j];
      for (std::size_t k = 0; k < j; ++k) s -= l(j, k) * xrow[k];
      xrow[j] = s / l(j, j);
    }
  }
  return x;
}

Tile syrk(const Tile& s, const Tile& x, const Tile& y) {
  if (x.cols() != y.cols() || s.rows() != x.rows() || s.cols() != y.rows()) {
    throw ShapeError("syrk: " + shape(s) + " - " + shape(x) + " * (" + shape(y) + ")^T does not conform");
  }
  Tile out = s;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const double* xi = x.row(i);
    for (std::size_t j = 0; j < s.cols(); ++j) {
      const double* yj = y.row(j);
      double dot = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) dot += xi[k] * yj[k];
      out(i, j) -= dot;
    }
  }
  return out;
}

Tile qr_leaf(const Tile& a) {
  if (a.rows() < a.cols()) throw ShapeError("qr_factor needs rows >= cols, got " + shape(a));
  return householder_r(a);
}

Tile qr_merge(const Tile& r1, const Tile& r2) {
  require_upper_triangular(r1, "qr_factor first input");
  require_upper_triangular(r2, "qr_factor second input");
  if (r1.rows() != r2.rows()) throw ShapeError("qr_factor inputs differ in size: " + shape(r1) + " vs " + shape(r2));
  Tile stacked(2 * r1.rows(), r1.cols());
  stacked.set_block(0, 0, r1);
  stacked.set_block(r1.rows(), 0, r2);
  return householder_r(std::move(stacked));
}

Tile matmul(const Tile& a, const Tile& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape(a) + " * " + shape(b) + " does not conform");
  return a * b;
}

Tile add(const Tile& a, const Tile& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add: " + shape(a) + " + " + shape(b));
  Tile out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

std::vector<Tile> run(std::string_view kernel, std::span<const Tile> in, std::span<const lang::Value> scalars) {
  if (!scalars.empty()) throw Error("kernel " + std::string(kernel) + " takes no scalar arguments");
  auto want = [&](std::size_t n) {
    if (in.size() != n) {
      throw Error("kernel " + std::string(kernel) + " expects " + std::to_string(n) + " inputs, got " +
                  std::to_string(in.size()));
    }
  };
  if (kernel == "chol") {
    want(1);
    return {chol(in[0])};
  }
  if (kernel == "trsm") {
    want(2);
    return {trsm(in[0], in[1])};
  }
  if (kernel == "syrk") {
    want(3);
    return {syrk(in[0], in[1], in[2])};
  }
  if (kernel == "matmul") {
    want(2);
    return {matmul(in[0], in[1])};
  }
  if (kernel == "add") {
    want(2);
    return {add(in[0], in[1])};
  }
  if (kernel == "qr_factor") {
    if (in.size() == 1) return {qr_leaf(in[0])};
    want(2);
    return {qr_merge(in[0], in[1])};
  }
  throw Error("unknown kernel '" + std::string(kernel) + "'");
}

std::uint64_t flop_count(std::string_view kernel, std::span<const Tile> in) {
  if (in.empty()) return 0;
  const std::uint64_t m = in[0].rows(), n = in[0].cols();
  if (kernel == "chol") return n * n * n / 3;
  if (kernel == "trsm" && in.size() == 2) return in[1].rows() * n * n;
  if (kernel == "syrk" && in.size() == 3) return 2 * m * n * in[1].cols();
  if (kernel == "matmul" && in.size() == 2) return 2 * m * n * in[1].cols();
  if (kernel == "add") return m * n;
  if (kernel == "qr_factor") {
    const std::uint64_t rows = in.size() == 2 ? 2 * m : m;
    return 2 * rows * n * n - 2 * n * n * n / 3;
  }
  return 0;
}

}  // namespace lambdapack::kernels
