#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lambdapack/lang/ast.hpp"
#include "lambdapack/store/object_store.hpp"
#include "lambdapack/tile.hpp"

namespace lambdapack::harness {

/// n×n symmetric positive definite: M·Mᵀ + n·I with M standard normal.
Tile spd_matrix(std::size_t n, std::uint64_t seed);
/// rows×cols with standard-normal entries.
Tile gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

enum class WorkloadKind { Cholesky, Tsqr, Gemm, Custom };

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::Cholesky;
  std::size_t block = 64;
  /// Cholesky/GEMM grid; 0 derives it from `size`.
  std::int64_t grid = 0;
  /// Matrix edge in scalars; 0 means grid × block.
  std::size_t size = 0;
  /// GEMM inner dimension in scalars; 0 means size.
  std::size_t inner = 0;
  /// TSQR shape and leaf count.
  std::int64_t leaves = 4;
  std::size_t rows = 0;  // 0 means leaves × block
  std::size_t cols = 8;
  /// Custom programs.
  std::filesystem::path program_path;
  lang::Binding params;
};

struct CheckResult {
  bool ok = false;
  double error = 0;
  double tolerance = 0;
  std::string what;
};

/// A program plus the glue between dense test data and its tiles.
class Workload {
 public:
  virtual ~Workload() = default;
  virtual const lang::Program& program() const = 0;
  virtual const lang::Binding& params() const = 0;
  virtual std::string describe() const = 0;
  /// Write the initial input tiles for `run_id`.
  virtual void seed_inputs(store::ObjectStore& store, const std::string& run_id) const = 0;
  /// Read the output tiles back into one dense matrix (empty for custom programs).
  virtual Tile assemble_output(store::ObjectStore& store, const std::string& run_id) const = 0;
  /// Numerical oracle; nullopt when there is none.
  virtual std::optional<CheckResult> check(const Tile& output) const = 0;
};

/// Throws Error on inconsistent shapes (e.g. non-power-of-two leaves).
std::unique_ptr<Workload> make_workload(const WorkloadSpec& spec, std::uint64_t seed);

}  // namespace lambdapack::harness
