#include "lambdapack/harness/bench.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <random>

#include "lambdapack/analysis/analyzer.hpp"
#include "lambdapack/error.hpp"
#include "lambdapack/harness/programs.hpp"
#include "lambdapack/lang/enumerate.hpp"
#include "lambdapack/lang/parser.hpp"

namespace lambdapack::harness {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  const auto mid = v.begin() + static_cast<long>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

lang::Program builtin_program(const std::string& name, std::int64_t grid) {
  if (name == "cholesky") return gen_cholesky(grid);
  if (name == "tsqr") return gen_tsqr(grid);
  if (name == "gemm") return gen_gemm(grid, grid);
  throw Error("unknown builtin program '" + name + "'");
}

std::string size_free_source(const lang::Program& p) {
  lang::Program q = p;
  for (auto& prm : q.params) prm.value.reset();
  return lang::print_program(q);
}

AnalysisBenchRow bench_analysis(const std::string& name, std::int64_t grid, int queries, std::uint64_t seed) {
  if (queries < 1) throw Error("need at least one query");
  const lang::Program program = builtin_program(name, grid);
  const lang::Binding params = lang::resolve_params(program);

  AnalysisBenchRow row;
  row.program = name;
  row.grid = grid;
  row.queries = queries;
  row.program_bytes = size_free_source(program).size();

  auto t0 = Clock::now();
  const auto nodes = lang::enumerate_nodes(program, params);
  const auto edges = lang::enumerate_edges(program, params);
  row.enumerate_seconds = since(t0);
  row.nodes = nodes.size();
  row.edges = edges.size();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
  const analysis::Analyzer analyzer(program, params);
  std::vector<double> child_t, parent_t;
  for (int q = 0; q < queries; ++q) {
    const auto& n = nodes[pick(rng)];
    t0 = Clock::now();
    (void)analyzer.children_of(n);
    child_t.push_back(since(t0));
    t0 = Clock::now();
    (void)analyzer.parents_of(n);
    parent_t.push_back(since(t0));
  }
  row.children_median_seconds = median(child_t);
  row.parents_median_seconds = median(parent_t);
  return row;
}

void write_bench_csv(std::ostream& out, const std::vector<AnalysisBenchRow>& rows) {
  out << "program,grid,nodes,edges,program_bytes,enumerate_s,children_median_s,parents_median_s,queries\n";
  for (const auto& r : rows) {
    out << r.program << ',' << r.grid << ',' << r.nodes << ',' << r.edges << ',' << r.program_bytes << ','
        << r.enumerate_seconds << ',' << r.children_median_seconds << ',' << r.parents_median_seconds << ','
        << r.queries << '\n';
  }
}

}  // namespace lambdapack::harness
