#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lambdapack/lang/eval.hpp"
#include "lambdapack/tile.hpp"

namespace lambdapack::kernels {

/// Lower-triangular L with positive diagonal and L·Lᵀ = A. Only the lower
/// triangle of A is read after the symmetry check.
Tile chol(const Tile& a);

/// X = A·L⁻ᵀ, i.e. the X with X·Lᵀ = A. Paired with chol and syrk this gives
/// the right-looking blocked factorization with a lower-triangular result.
Tile trsm(const Tile& l, const Tile& a);

/// S − X·Yᵀ.
Tile syrk(const Tile& s, const Tile& x, const Tile& y);

/// R factor of A (rows ≥ cols) with a nonnegative diagonal.
Tile qr_leaf(const Tile& a);
/// R factor of [R1; R2] for square upper-triangular R1, R2 of equal size.
Tile qr_merge(const Tile& r1, const Tile& r2);

Tile matmul(const Tile& a, const Tile& b);
Tile add(const Tile& a, const Tile& b);

/// Dispatch a kernel-call by name. `qr_factor` picks the leaf or merge form
/// by input count. Returns one tile per declared output.
std::vector<Tile> run(std::string_view kernel, std::span<const Tile> inputs,
                      std::span<const lang::Value> scalars = {});

/// Floating-point operation count of a kernel-call, for metrics.
std::uint64_t flop_count(std::string_view kernel, std::span<const Tile> inputs);

}  // namespace lambdapack::kernels
