#include <gtest/gtest.h>

#include "lambdapack/analysis/analyzer.hpp"
#include "lambdapack/analysis/solver.hpp"
#include "lambdapack/error.hpp"
#include "lambdapack/lang/enumerate.hpp"
#include "lambdapack/lang/parser.hpp"
#include "test_support.hpp"

namespace lambdapack::analysis {
namespace {

using lang::Binding;
using lang::NodeRef;
using testing::load_program;

constexpr int kChol = 0, kTrsm = 1, kSyrk = 2;
constexpr int kLeaf = 0, kMerge = 1;

std::vector<std::int64_t> idx(std::initializer_list<std::int64_t> v) { return v; }

TEST(FindReaders, CholeskyOnlyChildOfFirstUpdate) {
  for (std::int64_t b : {2, 4, 8}) {
    Analyzer a(load_program("cholesky"), {{"N", b}});
    auto readers = a.find_readers("S", idx({1, 1, 1}));
    ASSERT_EQ(readers.size(), 1u) << "B=" << b;
    EXPECT_EQ(readers[0], (NodeRef{kChol, {{"i", 1}}}));
  }
}

TEST(FindReaders, TsqrNonlinearIndex) {
  Analyzer a(load_program("tsqr"), {{"N", 8}});
  auto readers = a.find_readers("R", idx({6, 1}));
  ASSERT_EQ(readers.size(), 1u);
  EXPECT_EQ(readers[0], (NodeRef{kMerge, {{"i", 4}, {"level", 1}}}));
  // The first-argument match R[i,level] = R[6,1] solves to i=6, which is off the stride.
  EXPECT_FALSE(a.verify_binding(kMerge, {{"i", 6}, {"level", 1}}));
  EXPECT_TRUE(a.verify_binding(kMerge, {{"i", 4}, {"level", 1}}));
}

TEST(FindReaders, TerminalTileHasNoReaders) {
  for (std::int64_t b : {1, 2, 4}) {
    Analyzer a(load_program("cholesky"), {{"N", b}});
    EXPECT_TRUE(a.find_readers("O", idx({b - 1, b - 1})).empty());
  }
}

TEST(FindReaders, Errors) {
  Analyzer a(load_program("cholesky"), {{"N", 4}});
  EXPECT_THROW(a.find_readers("Q", idx({0, 0})), Error);
  EXPECT_THROW(a.find_readers("S", idx({0, 0})), Error);
}

TEST(FindWriter, Cholesky) {
  Analyzer a(load_program("cholesky"), {{"N", 4}});
  EXPECT_EQ(a.find_writer("S", idx({1, 1, 1})), (NodeRef{kSyrk, {{"i", 0}, {"j", 1}, {"k", 1}}}));
  EXPECT_EQ(a.find_writer("S", idx({0, 2, 1})), std::nullopt);
  EXPECT_EQ(a.find_writer("O", idx({0, 0})), (NodeRef{kChol, {{"i", 0}}}));
}

TEST(FindWriter, DoubleWriterIsLoud) {
  auto p = lang::parse_program(
      "param N = 2\nmatrix S[3] input\nmatrix O[2] output\n"
      "for i in range(0, N):\n    O[i,i] = chol(S[i,i,i])\nfor j in range(0, N):\n    O[j,j] = chol(S[j,j,j])\n");
  Analyzer a(p, {{"N", 2}});
  EXPECT_THROW(a.find_writer("O", idx({1, 1})), SsaViolation);
}

TEST(Children, Cholesky) {
  Analyzer a(load_program("cholesky"), {{"N", 2}});
  EXPECT_EQ(a.children_of({kChol, {{"i", 0}}}), (std::vector<NodeRef>{{kTrsm, {{"i", 0}, {"j", 1}}}}));
  EXPECT_EQ(a.children_of({kSyrk, {{"i", 0}, {"j", 1}, {"k", 1}}}), (std::vector<NodeRef>{{kChol, {{"i", 1}}}}));
}

TEST(Children, TsqrSink) {
  Analyzer a(load_program("tsqr"), {{"N", 4}});
  EXPECT_TRUE(a.children_of({kMerge, {{"i", 0}, {"level", 1}}}).empty());
}

TEST(Children, InvalidNodeThrows) {
  Analyzer a(load_program("cholesky"), {{"N", 4}});
  EXPECT_THROW(a.children_of({kTrsm, {{"i", 2}, {"j", 1}}}), EvalError);
  EXPECT_THROW(a.children_of({7, {}}), Error);
}

TEST(Parents, Cholesky) {
  Analyzer a(load_program("cholesky"), {{"N", 2}});
  EXPECT_TRUE(a.parents_of({kChol, {{"i", 0}}}).empty());
  EXPECT_EQ(a.parents_of({kTrsm, {{"i", 0}, {"j", 1}}}), (std::vector<NodeRef>{{kChol, {{"i", 0}}}}));
  EXPECT_EQ(a.parents_of({kChol, {{"i", 1}}}), (std::vector<NodeRef>{{kSyrk, {{"i", 0}, {"j", 1}, {"k", 1}}}}));
}

TEST(VerifyBinding, Cases) {
  Analyzer chol(load_program("cholesky"), {{"N", 4}});
  EXPECT_FALSE(chol.verify_binding(kTrsm, {{"i", 2}, {"j", 1}}));
  EXPECT_TRUE(chol.verify_binding(kTrsm, {{"i", 1}, {"j", 2}}));
  EXPECT_FALSE(chol.verify_binding(kTrsm, {{"i", 1}}));
  EXPECT_FALSE(chol.verify_binding(kTrsm, {{"i", 1}, {"j", 2}, {"z", 0}}));
  EXPECT_FALSE(chol.verify_binding(kChol, {{"i", 4}}));
  Analyzer tsqr(load_program("tsqr"), {{"N", 8}});
  EXPECT_FALSE(tsqr.verify_binding(kLeaf, {{"i", 8}}));
  EXPECT_FALSE(tsqr.verify_binding(kMerge, {{"i", 0}, {"level", 3}}));
}

TEST(Solver, AffineUnique) {
  using lang::make_binary;
  using lang::make_int;
  using lang::make_ref;
  IndexSystem sys;
  sys.unknowns = {"i", "j", "k"};
  sys.equations = {{make_binary(lang::BinaryOp::Add, make_ref("i"), make_int(1)), 1},
                   {make_ref("j"), 1},
                   {make_ref("k"), 1}};
  auto s = solve_index_system(sys);
  EXPECT_EQ(s.status, SolveStatus::Unique);
  EXPECT_EQ(s.binding, (Binding{{"i", 0}, {"j", 1}, {"k", 1}}));
}

TEST(Solver, NonlinearAfterLinear) {
  using lang::make_binary;
  using lang::make_pow;
  using lang::make_ref;
  IndexSystem sys;
  sys.unknowns = {"level", "i"};
  sys.equations = {{make_binary(lang::BinaryOp::Add, make_ref("i"), make_pow(2, make_ref("level"))), 6},
                   {make_ref("level"), 1}};
  auto s = solve_index_system(sys);
  EXPECT_EQ(s.status, SolveStatus::Unique);
  EXPECT_EQ(s.binding, (Binding{{"i", 4}, {"level", 1}}));
}

TEST(Solver, PowerOnlyEquation) {
  using lang::make_binary;
  using lang::make_int;
  using lang::make_pow;
  using lang::make_ref;
  IndexSystem sys;
  sys.unknowns = {"level"};
  sys.equations = {{make_binary(lang::BinaryOp::Mul, make_int(3), make_pow(2, make_binary(lang::BinaryOp::Add, make_ref("level"), make_int(1)))), 24}};
  auto s = solve_index_system(sys);
  EXPECT_EQ(s.status, SolveStatus::Unique);
  EXPECT_EQ(s.binding.at("level"), 2);
  sys.equations[0].value = 20;
  EXPECT_EQ(solve_index_system(sys).status, SolveStatus::None);
}

TEST(Solver, InconsistentAndFractional) {
  using lang::make_binary;
  using lang::make_int;
  using lang::make_ref;
  IndexSystem sys;
  sys.unknowns = {"i"};
  sys.equations = {{make_ref("i"), 3}, {make_ref("i"), 4}};
  EXPECT_EQ(solve_index_system(sys).status, SolveStatus::None);
  sys.equations = {{make_binary(lang::BinaryOp::Mul, make_int(2), make_ref("i")), 3}};
  EXPECT_EQ(solve_index_system(sys).status, SolveStatus::None);
  sys.equations = {{make_binary(lang::BinaryOp::Div, make_ref("i"), make_int(2)), 3}};
  auto s = solve_index_system(sys);
  EXPECT_EQ(s.status, SolveStatus::Unique);
  EXPECT_EQ(s.binding.at("i"), 6);
}

TEST(Solver, Underdetermined) {
  using lang::make_binary;
  using lang::make_ref;
  IndexSystem sys;
  sys.unknowns = {"i", "j", "k"};
  sys.equations = {{make_binary(lang::BinaryOp::Add, make_ref("i"), make_ref("j")), 3}, {make_ref("k"), 2}};
  auto s = solve_index_system(sys);
  EXPECT_EQ(s.status, SolveStatus::Underdetermined);
  EXPECT_EQ(s.binding, (Binding{{"k", 2}}));
}

TEST(Solver, ModuloCheckedOnceBound) {
  using lang::make_binary;
  using lang::make_int;
  using lang::make_ref;
  IndexSystem sys;
  sys.unknowns = {"i"};
  sys.context = {{"i", 5}};
  sys.equations = {{make_binary(lang::BinaryOp::Mod, make_ref("i"), make_int(4)), 1}};
  EXPECT_EQ(solve_index_system(sys).status, SolveStatus::Unique);
  sys.equations[0].value = 2;
  EXPECT_EQ(solve_index_system(sys).status, SolveStatus::None);
}

TEST(RationalArithmetic, Normalizes) {
  Rational a(6, -4);
  EXPECT_EQ(a.num(), -3);
  EXPECT_EQ(a.den(), 2);
  EXPECT_EQ((a + Rational(3, 2)), Rational(0));
  EXPECT_EQ((Rational(1, 3) * Rational(3)), Rational(1));
  EXPECT_THROW(Rational(1, 0), EvalError);
}

// Oracle equivalence: implicit edges versus the enumerated full DAG.
void expect_oracle_equivalence(const lang::Program& p, const Binding& params, bool memoize = false) {
  Analyzer a(p, params, {memoize});
  auto oracle = lang::enumerate_edges(p, params);
  std::vector<lang::Edge> implicit;
  std::vector<lang::Edge> reverse;
  for (const auto& n : lang::enumerate_nodes(p, params)) {
    ASSERT_TRUE(a.verify_binding(n.line, n.binding)) << n.to_string();
    for (auto& c : a.children_of(n)) {
      ASSERT_TRUE(a.verify_binding(c.line, c.binding));
      implicit.push_back({n, std::move(c)});
    }
    for (auto& par : a.parents_of(n)) reverse.push_back({std::move(par), n});
  }
  std::sort(implicit.begin(), implicit.end());
  std::sort(reverse.begin(), reverse.end());
  EXPECT_EQ(implicit, oracle);
  EXPECT_EQ(reverse, oracle);
}

TEST(OracleEquivalence, Cholesky) {
  auto p = load_program("cholesky");
  for (std::int64_t b = 1; b <= 8; ++b) expect_oracle_equivalence(p, {{"N", b}});
}

TEST(OracleEquivalence, Tsqr) {
  auto p = load_program("tsqr");
  for (std::int64_t n : {1, 2, 4, 8, 16}) expect_oracle_equivalence(p, {{"N", n}});
}

TEST(OracleEquivalence, Gemm) {
  auto p = load_program("gemm");
  for (std::int64_t n : {1, 2, 3})
    for (std::int64_t k : {1, 2, 4}) expect_oracle_equivalence(p, {{"N", n}, {"K", k}});
}

TEST(OracleEquivalence, GuardsAndAssignments) {
  auto p = lang::parse_program(R"(
param N = 6
matrix X[1] input
matrix Y[2] intermediate
matrix Z[1] output
for i in range(0, N):
    h = i / 2
    if i % 2 == 0:
        Y[i,0] = chol(X[i])
    else:
        Y[i,0] = chol(X[h])
for i in range(1, N):
    Z[i] = add(Y[i,0], Y[i-1,0])
for s in range(0, N, 3):
    if s + 1 < N:
        Y[s,1] = matmul(Y[s,0], Y[s+1,0])
)");
  for (std::int64_t n : {1, 2, 5, 6, 9}) expect_oracle_equivalence(p, {{"N", n}});
}

TEST(OracleEquivalence, MemoizedWritersAgree) {
  expect_oracle_equivalence(load_program("cholesky"), {{"N", 5}}, true);
  expect_oracle_equivalence(load_program("tsqr"), {{"N", 8}}, true);
}

TEST(FreeFunctions, MatchAnalyzer) {
  auto p = load_program("cholesky");
  Binding params{{"N", 3}};
  EXPECT_EQ(find_readers(p, params, "S", idx({1, 1, 1})).size(), 1u);
  EXPECT_TRUE(find_writer(p, params, "O", idx({0, 0})).has_value());
  EXPECT_EQ(children_of(p, params, {kChol, {{"i", 0}}}).size(), 2u);
  EXPECT_TRUE(parents_of(p, params, {kChol, {{"i", 0}}}).empty());
  EXPECT_TRUE(verify_binding(p, kChol, {{"i", 2}}, params));
}

}  // namespace
}  // namespace lambdapack::analysis
