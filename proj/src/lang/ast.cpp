#include "lambdapack/lang/ast.hpp"

#include <charconv>

#include "lambdapack/error.hpp"

namespace lambdapack::lang {

ExprPtr make_int(std::int64_t v) { return std::make_shared<const Expr>(Expr{IntConst{v}}); }
ExprPtr make_float(double v) { return std::make_shared<const Expr>(Expr{FloatConst{v}}); }
ExprPtr make_ref(std::string name) {
  return std::make_shared<const Expr>(Expr{RefExpr{std::move(name)}});
}
ExprPtr make_binary(BinaryOp op, ExprPtr l, ExprPtr r) {
  return std::make_shared<const Expr>(Expr{BinaryExpr{op, std::move(l), std::move(r)}});
}
ExprPtr make_compare(CompareOp op, ExprPtr l, ExprPtr r) {
  return std::make_shared<const Expr>(Expr{CompareExpr{op, std::move(l), std::move(r)}});
}
ExprPtr make_unary(UnaryOp op, ExprPtr e) {
  return std::make_shared<const Expr>(Expr{UnaryExpr{op, std::move(e)}});
}
ExprPtr make_pow(std::int64_t base, ExprPtr exponent) {
  return std::make_shared<const Expr>(Expr{PowExpr{base, std::move(exponent)}});
}

namespace {

bool eq(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return structurally_equal(*a, *b);
}

bool eq(const std::vector<ExprPtr>& a, const std::vector<ExprPtr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!eq(a[i], b[i])) return false;
  }
  return true;
}

bool eq(const IdxExpr& a, const IdxExpr& b) {
  return a.matrix == b.matrix && eq(a.indices, b.indices);
}

bool eq(const std::vector<IdxExpr>& a, const std::vector<IdxExpr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!eq(a[i], b[i])) return false;
  }
  return true;
}

bool eq(const Range& a, const Range& b) {
  return eq(a.lo, b.lo) && eq(a.hi, b.hi) && eq(a.step, b.step);
}

bool eq(const std::vector<Stmt>& a, const std::vector<Stmt>& b);

bool eq(const Stmt& a, const Stmt& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, KernelCall>) {
          return x.line_id == y.line_id && x.kernel == y.kernel && eq(x.outputs, y.outputs) &&
                 eq(x.inputs, y.inputs) && eq(x.scalars, y.scalars);
        } else if constexpr (std::is_same_v<T, Assign>) {
          return x.name == y.name && eq(x.value, y.value);
        } else if constexpr (std::is_same_v<T, If>) {
          return eq(x.cond, y.cond) && eq(x.then_body, y.then_body) &&
                 eq(x.else_body, y.else_body);
        } else {
          return x.var == y.var && eq(x.range, y.range) && eq(x.body, y.body);
        }
      },
      a.node);
}

bool eq(const std::vector<Stmt>& a, const std::vector<Stmt>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!eq(a[i], b[i])) return false;
  }
  return true;
}

void collect_lines(const std::vector<Stmt>& body, std::vector<const KernelCall*>& out) {
  for (const auto& s : body) {
    if (const auto* k = std::get_if<KernelCall>(&s.node)) {
      if (k->line_id >= static_cast<int>(out.size())) out.resize(k->line_id + 1, nullptr);
      out[k->line_id] = k;
    } else if (const auto* f = std::get_if<For>(&s.node)) {
      collect_lines(f->body, out);
    } else if (const auto* i = std::get_if<If>(&s.node)) {
      collect_lines(i->then_body, out);
      collect_lines(i->else_body, out);
    }
  }
}

}  // namespace

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, BinaryExpr> || std::is_same_v<T, CompareExpr>) {
          return x.op == y.op && eq(x.left, y.left) && eq(x.right, y.right);
        } else if constexpr (std::is_same_v<T, UnaryExpr>) {
          return x.op == y.op && eq(x.operand, y.operand);
        } else if constexpr (std::is_same_v<T, RefExpr>) {
          return x.name == y.name;
        } else if constexpr (std::is_same_v<T, PowExpr>) {
          return x.base == y.base && eq(x.exponent, y.exponent);
        } else {
          return x.value == y.value;
        }
      },
      a.node);
}

bool structurally_equal(const Program& a, const Program& b) {
  if (a.name != b.name || a.num_lines != b.num_lines) return false;
  if (a.params.size() != b.params.size() || a.matrices.size() != b.matrices.size() ||
      a.outputs.size() != b.outputs.size())
    return false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    if (a.params[i].name != b.params[i].name || a.params[i].value != b.params[i].value)
      return false;
  }
  for (std::size_t i = 0; i < a.matrices.size(); ++i) {
    const auto& x = a.matrices[i];
    const auto& y = b.matrices[i];
    if (x.name != y.name || x.arity != y.arity || x.role != y.role) return false;
  }
  for (std::size_t i = 0; i < a.outputs.size(); ++i) {
    const auto& x = a.outputs[i];
    const auto& y = b.outputs[i];
    if (!eq(x.tile, y.tile) || x.loops.size() != y.loops.size()) return false;
    for (std::size_t j = 0; j < x.loops.size(); ++j) {
      if (x.loops[j].var != y.loops[j].var || !eq(x.loops[j].range, y.loops[j].range))
        return false;
    }
  }
  return eq(a.body, b.body);
}

const MatrixDecl* Program::find_matrix(std::string_view n) const {
  for (const auto& m : matrices) {
    if (m.name == n) return &m;
  }
  return nullptr;
}

const Param* Program::find_param(std::string_view n) const {
  for (const auto& p : params) {
    if (p.name == n) return &p;
  }
  return nullptr;
}

std::vector<const KernelCall*> Program::kernel_lines() const {
  std::vector<const KernelCall*> out;
  out.reserve(num_lines);
  collect_lines(body, out);
  return out;
}

std::string to_string(const Binding& b) {
  std::string out;
  for (const auto& [k, v] : b) {
    if (!out.empty()) out += ',';
    out += k;
    out += '=';
    out += std::to_string(v);
  }
  return out;
}

std::string NodeRef::to_string() const {
  return std::to_string(line) + ":" + lang::to_string(binding);
}

namespace {

std::int64_t parse_int(std::string_view s, std::string_view what) {
  std::int64_t v = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || first == last) {
    throw Error("malformed " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

NodeRef NodeRef::parse(std::string_view text) {
  text = trim(text);
  auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error("malformed node '" + std::string(text) + "', expected line:var=val,...");
  }
  NodeRef n;
  n.line = static_cast<int>(parse_int(trim(text.substr(0, colon)), "line id"));
  auto rest = text.substr(colon + 1);
  while (!trim(rest).empty()) {
    auto comma = rest.find(',');
    auto item = trim(rest.substr(0, comma));
    auto eqpos = item.find('=');
    if (eqpos == std::string_view::npos) {
      throw Error("malformed binding entry '" + std::string(item) + "'");
    }
    auto name = trim(item.substr(0, eqpos));
    if (name.empty()) throw Error("empty variable name in node '" + std::string(text) + "'");
    n.binding[std::string(name)] = parse_int(trim(item.substr(eqpos + 1)), "binding value");
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return n;
}

std::string TileRef::to_string() const {
  std::string out = matrix + "[";
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(indices[i]);
  }
  return out + "]";
}

}  // namespace lambdapack::lang
