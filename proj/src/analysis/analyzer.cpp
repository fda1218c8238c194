#include "lambdapack/analysis/analyzer.hpp"

#include <algorithm>
#include <functional>

#include "lambdapack/error.hpp"

namespace lambdapack::analysis {

namespace {

using lang::ExprPtr;
using Substitution = std::map<std::string, ExprPtr, std::less<>>;

ExprPtr substitute(const ExprPtr& e, const Substitution& subst) {
  if (subst.empty()) return e;
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, lang::RefExpr>) {
          auto it = subst.find(n.name);
          return it == subst.end() ? e : it->second;
        } else if constexpr (std::is_same_v<T, lang::BinaryExpr>) {
          return lang::make_binary(n.op, substitute(n.left, subst), substitute(n.right, subst));
        } else if constexpr (std::is_same_v<T, lang::CompareExpr>) {
          return lang::make_compare(n.op, substitute(n.left, subst), substitute(n.right, subst));
        } else if constexpr (std::is_same_v<T, lang::UnaryExpr>) {
          return lang::make_unary(n.op, substitute(n.operand, subst));
        } else if constexpr (std::is_same_v<T, lang::PowExpr>) {
          return lang::make_pow(n.base, substitute(n.exponent, subst));
        } else {
          return e;
        }
      },
      e->node);
}

lang::IdxExpr substitute(const lang::IdxExpr& e, const Substitution& subst) {
  lang::IdxExpr out{e.matrix, {}};
  for (const auto& ix : e.indices) out.indices.push_back(substitute(ix, subst));
  return out;
}

lang::Range substitute(const lang::Range& r, const Substitution& subst) {
  return {substitute(r.lo, subst), substitute(r.hi, subst), substitute(r.step, subst)};
}

struct Builder {
  std::vector<LineInfo>& lines;

  void walk(const std::vector<lang::Stmt>& body, std::vector<ScopeItem>& scope,
            std::vector<std::string>& loops, Substitution subst) {
    for (const auto& s : body) {
      if (const auto* k = std::get_if<lang::KernelCall>(&s.node)) {
        LineInfo info;
        info.line = k->line_id;
        info.call = k;
        info.scope = scope;
        info.loop_vars = loops;
        for (const auto& r : k->inputs) info.solver_reads.push_back(substitute(r, subst));
        for (const auto& w : k->outputs) info.solver_writes.push_back(substitute(w, subst));
        if (k->line_id >= static_cast<int>(lines.size())) lines.resize(k->line_id + 1);
        lines[k->line_id] = std::move(info);
      } else if (const auto* a = std::get_if<lang::Assign>(&s.node)) {
        scope.push_back({ScopeItem::Kind::Assign, a->name, {}, {}, a->value, false});
        subst[a->name] = substitute(a->value, subst);
      } else if (const auto* i = std::get_if<lang::If>(&s.node)) {
        auto mark = scope.size();
        scope.push_back({ScopeItem::Kind::Guard, "", {}, {}, i->cond, false});
        walk(i->then_body, scope, loops, subst);
        scope.resize(mark);
        scope.push_back({ScopeItem::Kind::Guard, "", {}, {}, i->cond, true});
        walk(i->else_body, scope, loops, subst);
        scope.resize(mark);
      } else if (const auto* f = std::get_if<lang::For>(&s.node)) {
        auto mark = scope.size();
        scope.push_back({ScopeItem::Kind::Loop, f->var, f->range, substitute(f->range, subst), nullptr, false});
        loops.push_back(f->var);
        walk(f->body, scope, loops, subst);
        loops.pop_back();
        scope.resize(mark);
      }
    }
  }
};

bool in_range(std::int64_t v, std::int64_t lo, std::int64_t hi, std::int64_t step) {
  if (step > 0) {
    if (v < lo || v >= hi) return false;
  } else if (step < 0) {
    if (v > lo || v <= hi) return false;
  } else {
    return false;
  }
  return (v - lo) % step == 0;
}

}  // namespace

std::size_t Analyzer::TileHash::operator()(const lang::TileRef& t) const noexcept {
  std::size_t h = std::hash<std::string>{}(t.matrix);
  for (auto i : t.indices) h = h * 1000003u ^ std::hash<std::int64_t>{}(i);
  return h;
}

Analyzer::Analyzer(lang::Program program, lang::Binding params, AnalyzerOptions options)
    : program_(std::move(program)), params_(std::move(params)), options_(options) {
  for (const auto& p : program_.params) {
    if (!params_.count(p.name)) throw EvalError("unbound parameter '" + p.name + "'");
  }
  std::vector<ScopeItem> scope;
  std::vector<std::string> loops;
  Builder{lines_}.walk(program_.body, scope, loops, {});
}

const LineInfo& Analyzer::line(int id) const {
  if (id < 0 || id >= static_cast<int>(lines_.size()) || !lines_[id].call) {
    throw Error("no kernel call with line id " + std::to_string(id));
  }
  return lines_[id];
}

const lang::MatrixDecl& Analyzer::matrix(std::string_view name) const {
  const auto* m = program_.find_matrix(name);
  if (!m) throw Error("unknown matrix '" + std::string(name) + "'");
  return *m;
}

std::optional<lang::ValueScope> Analyzer::try_scope(const LineInfo& info, const lang::Binding& b) const {
  if (b.size() != info.loop_vars.size()) return std::nullopt;
  for (const auto& v : info.loop_vars) {
    if (!b.count(v)) return std::nullopt;
  }
  lang::ValueScope scope;
  for (const auto& [k, v] : params_) scope[k] = v;
  try {
    for (const auto& item : info.scope) {
      switch (item.kind) {
        case ScopeItem::Kind::Loop: {
          auto lo = lang::eval_int(*item.range.lo, scope);
          auto hi = lang::eval_int(*item.range.hi, scope);
          auto step = lang::eval_int(*item.range.step, scope);
          auto v = b.find(item.name)->second;
          if (!in_range(v, lo, hi, step)) return std::nullopt;
          scope[item.name] = v;
          break;
        }
        case ScopeItem::Kind::Guard:
          if (lang::truthy(lang::eval_scalar(*item.expr, scope)) == item.negated) return std::nullopt;
          break;
        case ScopeItem::Kind::Assign:
          scope[item.name] = lang::eval_scalar(*item.expr, scope);
          break;
      }
    }
  } catch (const EvalError&) {
    return std::nullopt;
  }
  return scope;
}

bool Analyzer::verify_binding(int line_id, const lang::Binding& b) const {
  return try_scope(line(line_id), b).has_value();
}

lang::ValueScope Analyzer::scope_of(const lang::NodeRef& n) const {
  auto scope = try_scope(line(n.line), n.binding);
  if (!scope) throw EvalError("node " + n.to_string() + " is outside the iteration space");
  return *scope;
}

namespace {

std::vector<lang::TileRef> eval_tiles(const std::vector<lang::IdxExpr>& exprs, const lang::ValueScope& scope) {
  std::vector<lang::TileRef> out;
  for (const auto& e : exprs) {
    lang::TileRef t{e.matrix, {}};
    for (const auto& ix : e.indices) t.indices.push_back(lang::eval_int(*ix, scope, lang::EvalMode::Index));
    out.push_back(std::move(t));
  }
  return out;
}

void sort_unique(std::vector<lang::NodeRef>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

std::vector<lang::TileRef> Analyzer::reads_of(const lang::NodeRef& n) const {
  return eval_tiles(line(n.line).call->inputs, scope_of(n));
}

std::vector<lang::TileRef> Analyzer::writes_of(const lang::NodeRef& n) const {
  return eval_tiles(line(n.line).call->outputs, scope_of(n));
}

void Analyzer::collect(const LineInfo& info, const lang::IdxExpr& symbolic, const lang::IdxExpr& original,
                       std::span<const std::int64_t> idx, const lang::Binding& known,
                       std::vector<lang::NodeRef>& out) const {
  IndexSystem sys;
  sys.unknowns = info.loop_vars;
  sys.context = known;
  for (std::size_t d = 0; d < idx.size(); ++d) sys.equations.push_back({symbolic.indices[d], idx[d]});
  auto sol = solve_index_system(sys);
  if (sol.status == SolveStatus::None) return;

  if (sol.status == SolveStatus::Underdetermined) {
    // Enumerate the outermost free loop variable over its runtime range; every
    // variable outside it is already fixed.
    lang::Binding next = known;
    for (const auto& [k, v] : sol.binding) next[k] = v;
    const ScopeItem* loop = nullptr;
    for (const auto& item : info.scope) {
      if (item.kind == ScopeItem::Kind::Loop && !next.count(item.name)) {
        loop = &item;
        break;
      }
    }
    if (!loop) return;
    std::int64_t lo, hi, step;
    try {
      lo = lang::eval_int(*loop->solver_range.lo, next);
      hi = lang::eval_int(*loop->solver_range.hi, next);
      step = lang::eval_int(*loop->solver_range.step, next);
    } catch (const EvalError&) {
      return;
    }
    if (step == 0) return;
    for (std::int64_t v = lo; step > 0 ? v < hi : v > hi; v += step) {
      next[loop->name] = v;
      collect(info, symbolic, original, idx, next, out);
    }
    return;
  }

  lang::NodeRef node{info.line, sol.binding};
  auto scope = try_scope(info, node.binding);
  if (!scope) return;
  // Confirm against the program's own evaluation semantics.
  try {
    for (std::size_t d = 0; d < idx.size(); ++d) {
      if (lang::eval_int(*original.indices[d], *scope, lang::EvalMode::Index) != idx[d]) return;
    }
  } catch (const EvalError&) {
    return;
  }
  out.push_back(std::move(node));
}

std::vector<lang::NodeRef> Analyzer::solve_access(Access kind, std::string_view matrix_name,
                                                  std::span<const std::int64_t> idx) const {
  const auto& decl = matrix(matrix_name);
  if (static_cast<int>(idx.size()) != decl.arity) {
    throw Error("matrix '" + decl.name + "' has arity " + std::to_string(decl.arity) + ", got " +
                std::to_string(idx.size()) + " indices");
  }
  std::vector<lang::NodeRef> out;
  for (const auto& info : lines_) {
    if (!info.call) continue;
    const auto& symbolic = kind == Access::Read ? info.solver_reads : info.solver_writes;
    const auto& original = kind == Access::Read ? info.call->inputs : info.call->outputs;
    for (std::size_t a = 0; a < symbolic.size(); ++a) {
      if (symbolic[a].matrix != matrix_name) continue;
      collect(info, symbolic[a], original[a], idx, params_, out);
    }
  }
  sort_unique(out);
  return out;
}

std::vector<lang::NodeRef> Analyzer::find_readers(std::string_view matrix_name,
                                                  std::span<const std::int64_t> idx) const {
  return solve_access(Access::Read, matrix_name, idx);
}

std::optional<lang::NodeRef> Analyzer::find_writer(std::string_view matrix_name,
                                                   std::span<const std::int64_t> idx) const {
  lang::TileRef key{std::string(matrix_name), {idx.begin(), idx.end()}};
  if (options_.memoize_writers) {
    std::lock_guard lock(memo_mu_);
    if (auto it = writer_memo_.find(key); it != writer_memo_.end()) return it->second;
  }
  auto writers = solve_access(Access::Write, matrix_name, idx);
  if (writers.size() > 1) {
    std::string msg = "tile " + key.to_string() + " has " + std::to_string(writers.size()) + " writers:";
    for (const auto& w : writers) msg += " (" + w.to_string() + ")";
    throw SsaViolation(msg);
  }
  std::optional<lang::NodeRef> result;
  if (!writers.empty()) result = std::move(writers.front());
  if (options_.memoize_writers) {
    std::lock_guard lock(memo_mu_);
    writer_memo_.emplace(std::move(key), result);
  }
  return result;
}

std::vector<lang::NodeRef> Analyzer::children_of(const lang::NodeRef& n) const {
  std::vector<lang::NodeRef> out;
  for (const auto& t : writes_of(n)) {
    auto readers = find_readers(t.matrix, t.indices);
    out.insert(out.end(), std::make_move_iterator(readers.begin()), std::make_move_iterator(readers.end()));
  }
  sort_unique(out);
  return out;
}

std::vector<lang::NodeRef> Analyzer::parents_of(const lang::NodeRef& n) const {
  std::vector<lang::NodeRef> out;
  for (const auto& t : reads_of(n)) {
    if (auto w = find_writer(t.matrix, t.indices)) out.push_back(std::move(*w));
  }
  sort_unique(out);
  return out;
}

std::vector<lang::NodeRef> find_readers(const lang::Program& p, const lang::Binding& params,
                                        std::string_view matrix, std::span<const std::int64_t> idx) {
  return Analyzer(p, params).find_readers(matrix, idx);
}

std::optional<lang::NodeRef> find_writer(const lang::Program& p, const lang::Binding& params,
                                         std::string_view matrix, std::span<const std::int64_t> idx) {
  return Analyzer(p, params).find_writer(matrix, idx);
}

std::vector<lang::NodeRef> children_of(const lang::Program& p, const lang::Binding& params,
                                       const lang::NodeRef& n) {
  return Analyzer(p, params).children_of(n);
}

std::vector<lang::NodeRef> parents_of(const lang::Program& p, const lang::Binding& params,
                                      const lang::NodeRef& n) {
  return Analyzer(p, params).parents_of(n);
}

bool verify_binding(const lang::Program& p, int line, const lang::Binding& b, const lang::Binding& params) {
  return Analyzer(p, params).verify_binding(line, b);
}

}  // namespace lambdapack::analysis
