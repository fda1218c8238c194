#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lambdapack::lang {

enum class BinaryOp { Add, Sub, Mul, Div, Mod, And, Or };
enum class CompareOp { EQ, NE, LT, GT, LE, GE };
enum class UnaryOp { Neg, Not, Log, Ceiling, Floor, Log2 };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct BinaryExpr {
  BinaryOp op;
  ExprPtr left;
  ExprPtr right;
};

struct CompareExpr {
  CompareOp op;
  ExprPtr left;
  ExprPtr right;
};

struct UnaryExpr {
  UnaryOp op;
  ExprPtr operand;
};

struct RefExpr {
  std::string name;
};

struct IntConst {
  std::int64_t value;
};

struct FloatConst {
  double value;
};

// `base ** exponent` with an integer literal base; the tree-reduction idiom.
struct PowExpr {
  std::int64_t base;
  ExprPtr exponent;
};

struct Expr {
  std::variant<BinaryExpr, CompareExpr, UnaryExpr, RefExpr, IntConst, FloatConst, PowExpr> node;
};

ExprPtr make_int(std::int64_t v);
ExprPtr make_float(double v);
ExprPtr make_ref(std::string name);
ExprPtr make_binary(BinaryOp op, ExprPtr l, ExprPtr r);
ExprPtr make_compare(CompareOp op, ExprPtr l, ExprPtr r);
ExprPtr make_unary(UnaryOp op, ExprPtr e);
ExprPtr make_pow(std::int64_t base, ExprPtr exponent);

bool structurally_equal(const Expr& a, const Expr& b);

/// A symbolic tile reference `M[e0, e1, ...]`.
struct IdxExpr {
  std::string matrix;
  std::vector<ExprPtr> indices;
};

enum class MatrixRole { Input, Intermediate, Output };

struct MatrixDecl {
  std::string name;
  int arity = 0;
  MatrixRole role = MatrixRole::Intermediate;
};

/// Half-open `range(lo, hi, step)`.
struct Range {
  ExprPtr lo;
  ExprPtr hi;
  ExprPtr step;
};

struct Stmt;

struct KernelCall {
  int line_id = -1;
  std::string kernel;
  std::vector<IdxExpr> outputs;
  std::vector<IdxExpr> inputs;
  std::vector<ExprPtr> scalars;
};

struct Assign {
  std::string name;
  ExprPtr value;
};

struct If {
  ExprPtr cond;
  std::vector<Stmt> then_body;
  std::vector<Stmt> else_body;
};

struct For {
  std::string var;
  Range range;
  std::vector<Stmt> body;
};

struct Stmt {
  std::variant<KernelCall, Assign, If, For> node;
};

struct LoopSpec {
  std::string var;
  Range range;
};

/// `output M[...] for v in range(...) ...`; later loops nest inside earlier ones.
struct OutputClause {
  IdxExpr tile;
  std::vector<LoopSpec> loops;
};

struct Param {
  std::string name;
  std::optional<std::int64_t> value;
};

struct Program {
  std::string name;
  std::vector<Param> params;
  std::vector<MatrixDecl> matrices;
  std::vector<Stmt> body;
  std::vector<OutputClause> outputs;
  int num_lines = 0;

  const MatrixDecl* find_matrix(std::string_view name) const;
  const Param* find_param(std::string_view name) const;

  /// KernelCall statements indexed by line id.
  std::vector<const KernelCall*> kernel_lines() const;
};

bool structurally_equal(const Program& a, const Program& b);

/// Concrete loop-variable assignment. Ordered so printing is canonical.
using Binding = std::map<std::string, std::int64_t, std::less<>>;

/// One dynamic task instance: (kernel-call line id, loop binding).
struct NodeRef {
  int line = 0;
  Binding binding;

  auto operator<=>(const NodeRef&) const = default;
  bool operator==(const NodeRef&) const = default;

  /// `line:var=val,...` with variables in name order.
  std::string to_string() const;
  static NodeRef parse(std::string_view text);
};

/// A concrete tile address `M[i0, i1, ...]`.
struct TileRef {
  std::string matrix;
  std::vector<std::int64_t> indices;

  auto operator<=>(const TileRef&) const = default;
  bool operator==(const TileRef&) const = default;

  std::string to_string() const;
};

std::string to_string(const Binding& b);

}  // namespace lambdapack::lang
