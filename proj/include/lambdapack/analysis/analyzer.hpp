#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lambdapack/analysis/solver.hpp"
#include "lambdapack/lang/ast.hpp"
#include "lambdapack/lang/eval.hpp"

namespace lambdapack::analysis {

/// What encloses a kernel call, outermost first.
struct ScopeItem {
  enum class Kind { Loop, Guard, Assign };
  Kind kind;
  std::string name;       // loop variable or assigned scalar
  lang::Range range;      // Loop
  lang::Range solver_range;  // Loop, with enclosing assignments inlined
  lang::ExprPtr expr;     // Guard condition or Assign value
  bool negated = false;   // Guard taken on the else branch
};

struct LineInfo {
  int line = -1;
  const lang::KernelCall* call = nullptr;
  std::vector<ScopeItem> scope;
  std::vector<std::string> loop_vars;
  // Index expressions with enclosing scalar assignments inlined, for solving.
  std::vector<lang::IdxExpr> solver_reads;
  std::vector<lang::IdxExpr> solver_writes;
};

struct AnalyzerOptions {
  /// Cache tile -> writer results. Must not change any answer.
  bool memoize_writers = false;
};

/// Answers dependency queries for single nodes of the implicit task graph by
/// solving index equations against each kernel-call line. Never enumerates
/// the iteration space except for loop variables the equations leave free.
/// Thread-safe.
class Analyzer {
 public:
  Analyzer(lang::Program program, lang::Binding params, AnalyzerOptions options = {});

  Analyzer(const Analyzer&) = delete;
  Analyzer& operator=(const Analyzer&) = delete;

  const lang::Program& program() const { return program_; }
  const lang::Binding& params() const { return params_; }
  const std::vector<LineInfo>& lines() const { return lines_; }
  const LineInfo& line(int id) const;

  /// Nodes whose kernel call reads `matrix[idx]`, sorted.
  std::vector<lang::NodeRef> find_readers(std::string_view matrix, std::span<const std::int64_t> idx) const;

  /// The node writing `matrix[idx]`, or nullopt when the tile is initial input.
  /// Throws SsaViolation when more than one node writes it.
  std::optional<lang::NodeRef> find_writer(std::string_view matrix, std::span<const std::int64_t> idx) const;

  std::vector<lang::NodeRef> children_of(const lang::NodeRef& n) const;
  std::vector<lang::NodeRef> parents_of(const lang::NodeRef& n) const;

  /// True iff the binding lies in the line's iteration space: every enclosing
  /// loop admits its value (bounds and step) and every guard holds.
  bool verify_binding(int line, const lang::Binding& b) const;

  /// Full evaluation scope (params, loops, assigned scalars) for a node.
  /// Throws EvalError when the node is not in the iteration space.
  lang::ValueScope scope_of(const lang::NodeRef& n) const;

  std::vector<lang::TileRef> reads_of(const lang::NodeRef& n) const;
  std::vector<lang::TileRef> writes_of(const lang::NodeRef& n) const;

  const lang::MatrixDecl& matrix(std::string_view name) const;

 private:
  enum class Access { Read, Write };

  std::vector<lang::NodeRef> solve_access(Access kind, std::string_view matrix,
                                          std::span<const std::int64_t> idx) const;
  void collect(const LineInfo& line, const lang::IdxExpr& symbolic, const lang::IdxExpr& original,
               std::span<const std::int64_t> idx, const lang::Binding& known,
               std::vector<lang::NodeRef>& out) const;
  std::optional<lang::ValueScope> try_scope(const LineInfo& line, const lang::Binding& b) const;

  lang::Program program_;
  lang::Binding params_;
  AnalyzerOptions options_;
  std::vector<LineInfo> lines_;

  struct TileHash {
    std::size_t operator()(const lang::TileRef& t) const noexcept;
  };
  mutable std::mutex memo_mu_;
  mutable std::unordered_map<lang::TileRef, std::optional<lang::NodeRef>, TileHash> writer_memo_;
};

// Free-function forms of the queries; each builds a fresh Analyzer.
std::vector<lang::NodeRef> find_readers(const lang::Program& p, const lang::Binding& params,
                                        std::string_view matrix, std::span<const std::int64_t> idx);
std::optional<lang::NodeRef> find_writer(const lang::Program& p, const lang::Binding& params,
                                         std::string_view matrix, std::span<const std::int64_t> idx);
std::vector<lang::NodeRef> children_of(const lang::Program& p, const lang::Binding& params,
                                       const lang::NodeRef& n);
std::vector<lang::NodeRef> parents_of(const lang::Program& p, const lang::Binding& params,
                                      const lang::NodeRef& n);
bool verify_binding(const lang::Program& p, int line, const lang::Binding& b, const lang::Binding& params);

}  // namespace lambdapack::analysis
