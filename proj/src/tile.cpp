#include "lambdapack/tile.hpp"

#include <cmath>
#include <cstring>

#include "lambdapack/error.hpp"

namespace lambdapack {

Tile::Tile(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

Tile::Tile(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw ShapeError("tile of shape " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

Tile Tile::identity(std::size_t n) {
  Tile t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tile Tile::transpose() const {
  Tile t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Tile Tile::block(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const {
  if (r0 + rows > rows_ || c0 + cols > cols_) throw ShapeError("block out of range");
  Tile t(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) std::memcpy(t.row(r), row(r0 + r) + c0, cols * sizeof(double));
  return t;
}

void Tile::set_block(std::size_t r0, std::size_t c0, const Tile& src) {
  if (r0 + src.rows() > rows_ || c0 + src.cols() > cols_) throw ShapeError("block out of range");
  for (std::size_t r = 0; r < src.rows(); ++r) std::memcpy(row(r0 + r) + c0, src.row(r), src.cols() * sizeof(double));
}

bool Tile::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tile::frobenius_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

double Tile::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool operator==(const Tile& a, const Tile& b) {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ &&
         (a.values_.empty() || std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(double)) == 0);
}

Tile operator*(const Tile& a, const Tile& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul shape mismatch");
  Tile out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * brow[j];
    }
  }
  return out;
}

Tile operator-(const Tile& a, const Tile& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("subtraction shape mismatch");
  Tile out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

double relative_frobenius_error(const Tile& a, const Tile& b) {
  const double denom = b.frobenius_norm();
  const double num = (a - b).frobenius_norm();
  return denom == 0.0 ? num : num / denom;
}

}  // namespace lambdapack
