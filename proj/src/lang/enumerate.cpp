#include "lambdapack/lang/enumerate.hpp"

#include <algorithm>
#include <map>

#include "lambdapack/error.hpp"

namespace lambdapack::lang {

namespace {

using Visitor = std::function<void(const KernelCall&, const NodeRef&, const ValueScope&)>;

struct LoopBounds {
  std::int64_t lo;
  std::int64_t hi;
  std::int64_t step;
};

template <typename Scope>
LoopBounds eval_range(const Range& r, const Scope& scope, const std::string& var) {
  LoopBounds b{eval_int(*r.lo, scope), eval_int(*r.hi, scope), eval_int(*r.step, scope)};
  if (b.step == 0) throw EvalError("non-terminating loop over '" + var + "': step is 0");
  if (b.step < 0 && b.lo < b.hi) {
    throw EvalError("non-terminating loop over '" + var + "': negative step with lo < hi");
  }
  return b;
}

template <typename Fn>
void for_each_in(const LoopBounds& b, Fn&& fn) {
  if (b.step > 0) {
    for (std::int64_t v = b.lo; v < b.hi; v += b.step) fn(v);
  } else {
    for (std::int64_t v = b.lo; v > b.hi; v += b.step) fn(v);
  }
}

class Walker {
 public:
  explicit Walker(const Visitor& fn) : fn_(fn) {}

  void walk(const std::vector<Stmt>& body, ValueScope& scope, Binding& loops) {
    std::vector<std::pair<std::string, std::optional<Value>>> saved;
    for (const auto& s : body) {
      if (const auto* k = std::get_if<KernelCall>(&s.node)) {
        fn_(*k, NodeRef{k->line_id, loops}, scope);
      } else if (const auto* a = std::get_if<Assign>(&s.node)) {
        Value v = eval_scalar(*a->value, scope);
        auto it = scope.find(a->name);
        if (std::none_of(saved.begin(), saved.end(), [&](const auto& e) { return e.first == a->name; })) {
          saved.emplace_back(a->name, it == scope.end() ? std::nullopt : std::optional<Value>(it->second));
        }
        scope[a->name] = v;
      } else if (const auto* i = std::get_if<If>(&s.node)) {
        if (truthy(eval_scalar(*i->cond, scope))) {
          walk(i->then_body, scope, loops);
        } else {
          walk(i->else_body, scope, loops);
        }
      } else if (const auto* f = std::get_if<For>(&s.node)) {
        auto bounds = eval_range(f->range, scope, f->var);
        for_each_in(bounds, [&](std::int64_t v) {
          scope[f->var] = v;
          loops[f->var] = v;
          walk(f->body, scope, loops);
        });
        scope.erase(f->var);
        loops.erase(f->var);
      }
    }
    for (auto& [name, old] : saved) {
      if (old) {
        scope[name] = *old;
      } else {
        scope.erase(name);
      }
    }
  }

 private:
  const Visitor& fn_;
};

std::vector<TileRef> eval_tiles(const std::vector<IdxExpr>& exprs, const ValueScope& scope) {
  std::vector<TileRef> out;
  out.reserve(exprs.size());
  for (const auto& e : exprs) {
    TileRef t{e.matrix, {}};
    t.indices.reserve(e.indices.size());
    for (const auto& ix : e.indices) t.indices.push_back(eval_int(*ix, scope, EvalMode::Index));
    out.push_back(std::move(t));
  }
  return out;
}

ValueScope scope_from(const Binding& params) {
  ValueScope scope;
  for (const auto& [k, v] : params) scope[k] = v;
  return scope;
}

}  // namespace

void walk_nodes(const Program& p, const Binding& params, const Visitor& fn) {
  for (const auto& prm : p.params) {
    if (!params.count(prm.name)) throw EvalError("unbound parameter '" + prm.name + "'");
  }
  ValueScope scope = scope_from(params);
  Binding loops;
  Walker(fn).walk(p.body, scope, loops);
}

std::vector<NodeRef> enumerate_nodes(const Program& p, const Binding& params) {
  std::vector<NodeRef> out;
  walk_nodes(p, params, [&](const KernelCall&, const NodeRef& n, const ValueScope&) { out.push_back(n); });
  return out;
}

NodeAccess access_at(const KernelCall& call, const ValueScope& scope) {
  return NodeAccess{eval_tiles(call.inputs, scope), eval_tiles(call.outputs, scope)};
}

std::vector<SsaViolationInfo> validate_ssa(const Program& p, const Binding& params) {
  std::map<TileRef, std::vector<NodeRef>> writers;
  walk_nodes(p, params, [&](const KernelCall& call, const NodeRef& n, const ValueScope& scope) {
    for (auto& t : eval_tiles(call.outputs, scope)) writers[std::move(t)].push_back(n);
  });
  std::vector<SsaViolationInfo> out;
  for (auto& [tile, nodes] : writers) {
    // A node writing the same tile twice through two outputs is also a double write.
    if (nodes.size() > 1) out.push_back({tile, nodes});
  }
  return out;
}

std::vector<TileRef> output_tiles(const Program& p, const Binding& params) {
  std::vector<TileRef> out;
  if (p.outputs.empty()) {
    walk_nodes(p, params, [&](const KernelCall& call, const NodeRef&, const ValueScope& scope) {
      for (auto& t : eval_tiles(call.outputs, scope)) {
        const auto* m = p.find_matrix(t.matrix);
        if (m && m->role == MatrixRole::Output) out.push_back(std::move(t));
      }
    });
  } else {
    ValueScope scope = scope_from(params);
    for (const auto& clause : p.outputs) {
      std::function<void(std::size_t)> rec = [&](std::size_t depth) {
        if (depth == clause.loops.size()) {
          auto tiles = eval_tiles({clause.tile}, scope);
          out.push_back(std::move(tiles.front()));
          return;
        }
        const auto& loop = clause.loops[depth];
        for_each_in(eval_range(loop.range, scope, loop.var), [&](std::int64_t v) {
          scope[loop.var] = v;
          rec(depth + 1);
        });
        scope.erase(loop.var);
      };
      rec(0);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Edge> enumerate_edges(const Program& p, const Binding& params) {
  std::map<TileRef, NodeRef> writer;
  std::vector<std::pair<NodeRef, std::vector<TileRef>>> reads;
  walk_nodes(p, params, [&](const KernelCall& call, const NodeRef& n, const ValueScope& scope) {
    auto acc = access_at(call, scope);
    for (auto& t : acc.writes) writer.emplace(std::move(t), n);
    reads.emplace_back(n, std::move(acc.reads));
  });
  std::vector<Edge> edges;
  for (const auto& [node, tiles] : reads) {
    for (const auto& t : tiles) {
      if (auto it = writer.find(t); it != writer.end()) edges.push_back({it->second, node});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace lambdapack::lang
