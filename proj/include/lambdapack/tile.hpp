#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lambdapack {

/// Dense row-major block of doubles. Used both as the unit of storage and as
/// the operand type of the numerical kernels; whole matrices on the harness
/// side are just large tiles.
class Tile {
 public:
  Tile() = default;
  Tile(std::size_t rows, std::size_t cols);
  Tile(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tile zeros(std::size_t rows, std::size_t cols) { return Tile(rows, cols); }
  static Tile identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* row(std::size_t r) { return values_.data() + r * cols_; }
  const double* row(std::size_t r) const { return values_.data() + r * cols_; }

  Tile transpose() const;
  /// Copy of the sub-block starting at (r0, c0).
  Tile block(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const;
  void set_block(std::size_t r0, std::size_t c0, const Tile& src);

  bool all_finite() const;
  double frobenius_norm() const;
  double max_abs() const;

  /// Bitwise equality, so -0.0 != 0.0 and NaN payloads are compared too.
  friend bool operator==(const Tile& a, const Tile& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

Tile operator*(const Tile& a, const Tile& b);
Tile operator-(const Tile& a, const Tile& b);

/// ‖a − b‖_F / ‖b‖_F, or the absolute norm when b is zero.
double relative_frobenius_error(const Tile& a, const Tile& b);

}  // namespace lambdapack
