#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lambdapack/lang/ast.hpp"

namespace lambdapack::harness {

/// Implicit versus materialized dependency analysis for one program size.
struct AnalysisBenchRow {
  std::string program;
  std::int64_t grid = 0;
  std::uint64_t nodes = 0;
  std::uint64_t edges = 0;
  /// Canonical program text with parameter values blanked out.
  std::uint64_t program_bytes = 0;
  /// Full enumeration of every node and edge.
  double enumerate_seconds = 0;
  /// Median latency of single children_of / parents_of queries.
  double children_median_seconds = 0;
  double parents_median_seconds = 0;
  int queries = 0;
};

/// Builtin program `name` at size `grid` (GEMM uses K = grid).
lang::Program builtin_program(const std::string& name, std::int64_t grid);

/// Canonical source with parameter defaults removed: the part of a program
/// that does not depend on the problem size.
std::string size_free_source(const lang::Program& p);

/// Time both analysis modes. Query nodes are a seeded sample of the DAG;
/// the analyzer runs without its writer cache, so every query does the full solve.
AnalysisBenchRow bench_analysis(const std::string& name, std::int64_t grid, int queries, std::uint64_t seed);

void write_bench_csv(std::ostream& out, const std::vector<AnalysisBenchRow>& rows);

}  // namespace lambdapack::harness
