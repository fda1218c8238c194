#pragma once

#include <array>
#include <span>
#include <string_view>

namespace lambdapack::kernels {

struct KernelSignature {
  std::string_view name;
  int min_inputs;
  int max_inputs;
  int outputs;
};

inline constexpr std::array<KernelSignature, 6> kBuiltinSignatures{{
    {"chol", 1, 1, 1},
    {"trsm", 2, 2, 1},
    {"syrk", 3, 3, 1},
    {"qr_factor", 1, 2, 1},
    {"matmul", 2, 2, 1},
    {"add", 2, 2, 1},
}};

inline std::span<const KernelSignature> builtin_signatures() { return kBuiltinSignatures; }

inline const KernelSignature* find_signature(std::span<const KernelSignature> table,
                                             std::string_view name) {
  for (const auto& s : table) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

}  // namespace lambdapack::kernels
