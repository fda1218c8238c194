#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lambdapack/lang/ast.hpp"
#include "lambdapack/lang/eval.hpp"

namespace lambdapack::lang {

/// Brute-force walk of the iteration space in program order. This is the
/// reference the implicit analysis is checked against; it costs time
/// proportional to the number of nodes.
std::vector<NodeRef> enumerate_nodes(const Program& p, const Binding& params);

/// Visitor form of enumerate_nodes; `scope` holds params, loop variables and
/// assigned scalars visible at the call.
void walk_nodes(const Program& p, const Binding& params,
                const std::function<void(const KernelCall&, const NodeRef&, const ValueScope& scope)>& fn);

/// Concrete tiles read and written by `node` (index-context evaluation).
struct NodeAccess {
  std::vector<TileRef> reads;
  std::vector<TileRef> writes;
};

NodeAccess access_at(const KernelCall& call, const ValueScope& scope);

struct SsaViolationInfo {
  TileRef tile;
  std::vector<NodeRef> writers;
};

/// Every concrete tile written by more than one node. Empty means the program
/// is in single-assignment form for these parameters.
std::vector<SsaViolationInfo> validate_ssa(const Program& p, const Binding& params);

/// Tiles designated by the program's output clauses. Programs without explicit
/// clauses fall back to every tile written into an `output` matrix.
std::vector<TileRef> output_tiles(const Program& p, const Binding& params);

/// Full DAG from enumeration: every (producer, consumer) edge, sorted.
struct Edge {
  NodeRef from;
  NodeRef to;
  auto operator<=>(const Edge&) const = default;
  bool operator==(const Edge&) const = default;
};
std::vector<Edge> enumerate_edges(const Program& p, const Binding& params);

}  // namespace lambdapack::lang
