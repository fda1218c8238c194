#include "lambdapack/harness/workload.hpp"

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "lambdapack/error.hpp"
#include "lambdapack/harness/programs.hpp"
#include "lambdapack/lang/enumerate.hpp"
#include "lambdapack/lang/parser.hpp"
#include "lambdapack/store/big_matrix.hpp"

namespace lambdapack::harness {

using store::BigMatrix;
using store::TileKey;

Tile gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tile m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

Tile spd_matrix(std::size_t n, std::uint64_t seed) {
  const Tile m = gaussian_matrix(n, n, seed);
  Tile a = m * m.transpose();
  for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  // Product rounding can differ between (i,j) and (j,i); mirror the lower
  // triangle so the input is exactly symmetric.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) a(j, i) = a(i, j);
  return a;
}

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::int64_t log2_exact(std::int64_t n, const char* what) {
  if (n <= 0 || (n & (n - 1)) != 0) throw Error(std::string(what) + " must be a power of two, got " + std::to_string(n));
  std::int64_t l = 0;
  while ((std::int64_t{1} << l) < n) ++l;
  return l;
}

class CholeskyWorkload final : public Workload {
 public:
  CholeskyWorkload(const WorkloadSpec& spec, std::uint64_t seed)
      : n_(spec.size ? spec.size : static_cast<std::size_t>(spec.grid) * spec.block),
        shape_("A", n_, n_, spec.block),
        a_(spd_matrix(n_, seed)),
        program_(gen_cholesky(static_cast<std::int64_t>(shape_.grid_rows()))),
        params_{{"N", static_cast<std::int64_t>(shape_.grid_rows())}} {}

  const lang::Program& program() const override { return program_; }
  const lang::Binding& params() const override { return params_; }
  std::string describe() const override {
    return "cholesky " + std::to_string(n_) + "x" + std::to_string(n_) + " block " + std::to_string(shape_.block) +
           " grid " + std::to_string(shape_.grid_rows());
  }

  void seed_inputs(store::ObjectStore& store, const std::string& run_id) const override {
    for (const auto& t : store::partition(a_, shape_.block)) {
      if (t.j > t.i) continue;
      store.put_tile({run_id, "S", {0, static_cast<std::int64_t>(t.i), static_cast<std::int64_t>(t.j)}}, t.tile);
    }
  }

  Tile assemble_output(store::ObjectStore& store, const std::string& run_id) const override {
    const std::size_t g = shape_.grid_rows();
    std::vector<std::vector<Tile>> grid(g);
    for (std::size_t j = 0; j < g; ++j) {
      for (std::size_t i = 0; i < g; ++i) {
        if (i > j) {
          grid[j].push_back(Tile::zeros(shape_.tile_rows(j), shape_.tile_cols(i)));
          continue;
        }
        Tile t = store.get_tile({run_id, "O", {static_cast<std::int64_t>(j), static_cast<std::int64_t>(i)}});
        shape_.check_tile(j, i, t);
        grid[j].push_back(std::move(t));
      }
    }
    return store::assemble(grid);
  }

  std::optional<CheckResult> check(const Tile& l) const override {
    const double err = relative_frobenius_error(l * l.transpose(), a_);
    return CheckResult{err <= 1e-10, err, 1e-10, "||LL^T - A||_F / ||A||_F"};
  }

 private:
  std::size_t n_;
  BigMatrix shape_;
  Tile a_;
  lang::Program program_;
  lang::Binding params_;
};

class TsqrWorkload final : public Workload {
 public:
  TsqrWorkload(const WorkloadSpec& spec, std::uint64_t seed)
      : leaves_(spec.leaves),
        levels_(log2_exact(spec.leaves, "tsqr leaf count")),
        rows_(spec.rows ? spec.rows : static_cast<std::size_t>(spec.leaves) * spec.block),
        cols_(spec.cols),
        leaf_rows_(ceil_div(rows_, static_cast<std::size_t>(leaves_))),
        a_(gaussian_matrix(rows_, cols_, seed)),
        program_(gen_tsqr(leaves_)),
        params_{{"N", leaves_}} {
    if (leaf_rows_ * static_cast<std::size_t>(leaves_ - 1) >= rows_) {
      throw Error("tsqr: " + std::to_string(rows_) + " rows cannot fill " + std::to_string(leaves_) + " leaves");
    }
    const std::size_t last = rows_ - leaf_rows_ * static_cast<std::size_t>(leaves_ - 1);
    if (last < cols_) throw Error("tsqr: every leaf needs at least as many rows as columns");
  }

  const lang::Program& program() const override { return program_; }
  const lang::Binding& params() const override { return params_; }
  std::string describe() const override {
    return "tsqr " + std::to_string(rows_) + "x" + std::to_string(cols_) + " leaves " + std::to_string(leaves_);
  }

  void seed_inputs(store::ObjectStore& store, const std::string& run_id) const override {
    for (std::int64_t i = 0; i < leaves_; ++i) {
      const std::size_t r0 = static_cast<std::size_t>(i) * leaf_rows_;
      store.put_tile({run_id, "A", {i}}, a_.block(r0, 0, std::min(leaf_rows_, rows_ - r0), cols_));
    }
  }

  Tile assemble_output(store::ObjectStore& store, const std::string& run_id) const override {
    return store.get_tile({run_id, "R", {0, levels_}});
  }

  std::optional<CheckResult> check(const Tile& r) const override {
    const Tile gram = a_.transpose() * a_;
    const double err = relative_frobenius_error(r.transpose() * r, gram);
    return CheckResult{err <= 1e-10, err, 1e-10, "||R^T R - A^T A||_F / ||A^T A||_F"};
  }

 private:
  std::int64_t leaves_, levels_;
  std::size_t rows_, cols_, leaf_rows_;
  Tile a_;
  lang::Program program_;
  lang::Binding params_;
};

class GemmWorkload final : public Workload {
 public:
  GemmWorkload(const WorkloadSpec& spec, std::uint64_t seed)
      : n_(spec.size ? spec.size : static_cast<std::size_t>(spec.grid) * spec.block),
        k_(spec.inner ? spec.inner : n_),
        a_shape_("A", n_, k_, spec.block),
        b_shape_("B", k_, n_, spec.block),
        a_(gaussian_matrix(n_, k_, seed)),
        b_(gaussian_matrix(k_, n_, seed ^ 0x9e3779b97f4a7c15ULL)),
        grid_(static_cast<std::int64_t>(a_shape_.grid_rows())),
        kgrid_(static_cast<std::int64_t>(a_shape_.grid_cols())),
        levels_(log2_exact(kgrid_, "gemm inner block count")),
        program_(gen_gemm(grid_, kgrid_)),
        params_{{"N", grid_}, {"K", kgrid_}} {}

  const lang::Program& program() const override { return program_; }
  const lang::Binding& params() const override { return params_; }
  std::string describe() const override {
    return "gemm " + std::to_string(n_) + "x" + std::to_string(k_) + " * " + std::to_string(k_) + "x" +
           std::to_string(n_) + " block " + std::to_string(a_shape_.block);
  }

  void seed_inputs(store::ObjectStore& store, const std::string& run_id) const override {
    for (const auto& t : store::partition(a_, a_shape_.block))
      store.put_tile({run_id, "A", {static_cast<std::int64_t>(t.i), static_cast<std::int64_t>(t.j)}}, t.tile);
    for (const auto& t : store::partition(b_, b_shape_.block))
      store.put_tile({run_id, "B", {static_cast<std::int64_t>(t.i), static_cast<std::int64_t>(t.j)}}, t.tile);
  }

  Tile assemble_output(store::ObjectStore& store, const std::string& run_id) const override {
    std::vector<std::vector<Tile>> grid(static_cast<std::size_t>(grid_));
    for (std::int64_t i = 0; i < grid_; ++i)
      for (std::int64_t j = 0; j < grid_; ++j)
        grid[static_cast<std::size_t>(i)].push_back(store.get_tile({run_id, "P", {i, j, 0, levels_}}));
    return store::assemble(grid);
  }

  std::optional<CheckResult> check(const Tile& c) const override {
    const double err = relative_frobenius_error(c, a_ * b_);
    return CheckResult{err <= 1e-12, err, 1e-12, "||C - AB||_F / ||AB||_F"};
  }

 private:
  std::size_t n_, k_;
  BigMatrix a_shape_, b_shape_;
  Tile a_, b_;
  std::int64_t grid_, kgrid_, levels_;
  lang::Program program_;
  lang::Binding params_;
};

// Arbitrary programs: every tile that is read but never written gets a
// block×block SPD tile, which keeps every builtin kernel's preconditions
// satisfiable. There is no numerical oracle.
class CustomWorkload final : public Workload {
 public:
  CustomWorkload(const WorkloadSpec& spec, std::uint64_t seed) : block_(spec.block), seed_(seed) {
    std::ifstream in(spec.program_path);
    if (!in) throw Error("cannot read program " + spec.program_path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    program_ = lang::parse_program(ss.str());
    params_ = lang::resolve_params(program_, spec.params);
    name_ = spec.program_path.filename().string();
  }

  const lang::Program& program() const override { return program_; }
  const lang::Binding& params() const override { return params_; }
  std::string describe() const override { return "program " + name_ + " " + lang::to_string(params_); }

  void seed_inputs(store::ObjectStore& store, const std::string& run_id) const override {
    std::set<lang::TileRef> read, written;
    lang::walk_nodes(program_, params_, [&](const lang::KernelCall& call, const lang::NodeRef&, const lang::ValueScope& scope) {
      auto acc = lang::access_at(call, scope);
      read.insert(acc.reads.begin(), acc.reads.end());
      written.insert(acc.writes.begin(), acc.writes.end());
    });
    std::uint64_t k = 0;
    for (const auto& t : read) {
      if (written.contains(t)) continue;
      store.put_tile({run_id, t.matrix, t.indices}, spd_matrix(block_, seed_ + 7919 * ++k));
    }
  }

  Tile assemble_output(store::ObjectStore&, const std::string&) const override { return {}; }
  std::optional<CheckResult> check(const Tile&) const override { return std::nullopt; }

 private:
  std::size_t block_;
  std::uint64_t seed_;
  std::string name_;
  lang::Program program_;
  lang::Binding params_;
};

}  // namespace

std::unique_ptr<Workload> make_workload(const WorkloadSpec& spec, std::uint64_t seed) {
  if (spec.block == 0) throw Error("block size must be at least 1");
  switch (spec.kind) {
    case WorkloadKind::Cholesky:
      if (spec.size == 0 && spec.grid < 1) throw Error("cholesky needs a grid or a size");
      return std::make_unique<CholeskyWorkload>(spec, seed);
    case WorkloadKind::Tsqr: return std::make_unique<TsqrWorkload>(spec, seed);
    case WorkloadKind::Gemm:
      if (spec.size == 0 && spec.grid < 1) throw Error("gemm needs a grid or a size");
      return std::make_unique<GemmWorkload>(spec, seed);
    case WorkloadKind::Custom: return std::make_unique<CustomWorkload>(spec, seed);
  }
  throw Error("unknown workload");
}

}  // namespace lambdapack::harness
