#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lambdapack/lang/ast.hpp"

namespace lambdapack::harness {

namespace detail {
extern const char* const kCholeskySource;
extern const char* const kTsqrSource;
extern const char* const kGemmSource;
}  // namespace detail

/// Names accepted by --builtin.
const std::vector<std::string>& builtin_names();

/// Source text of a shipped program with its parameter defaults replaced.
/// Throws Error for unknown names or parameters.
std::string builtin_source(std::string_view name, const lang::Binding& params = {});

/// Tiled Cholesky over a B×B grid.
lang::Program gen_cholesky(std::int64_t b);
/// Tall-skinny QR over n row blocks; n must be a power of two.
lang::Program gen_tsqr(std::int64_t n);
/// C = A·B over a b×b output grid with inner dimension k (a power of two).
lang::Program gen_gemm(std::int64_t b, std::int64_t k);

}  // namespace lambdapack::harness
