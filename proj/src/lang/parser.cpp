#include "lambdapack/lang/parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "lambdapack/error.hpp"

namespace lambdapack::lang {

namespace {

enum class Tok { Ident, Int, Float, Punct, Newline, Indent, Dedent, End };

struct Token {
  Tok kind;
  std::string text;
  int line;
  int col;
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::vector<int> indents{0};
  // Open brackets with their positions, so a mismatch can point at both ends.
  std::vector<Token> open;
  int line_no = 0;
  std::size_t pos = 0;
  bool continuing = false;

  while (pos <= src.size()) {
    if (pos == src.size()) break;
    std::size_t eol = src.find('\n', pos);
    if (eol == std::string_view::npos) eol = src.size();
    std::string_view line = src.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    pos = eol + 1;

    std::size_t i = 0;
    if (!continuing) {
      int width = 0;
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
        if (line[i] == '\t') throw ParseError(line_no, static_cast<int>(i) + 1, "tabs are not allowed in indentation");
        ++width;
        ++i;
      }
      if (i == line.size() || line[i] == '#') continue;
      if (width > indents.back()) {
        indents.push_back(width);
        out.push_back({Tok::Indent, "", line_no, 1});
      } else {
        while (width < indents.back()) {
          indents.pop_back();
          out.push_back({Tok::Dedent, "", line_no, 1});
        }
        if (width != indents.back()) {
          throw ParseError(line_no, width + 1, "inconsistent dedent");
        }
      }
    }

    bool any = false;
    while (i < line.size()) {
      char c = line[i];
      int col = static_cast<int>(i) + 1;
      if (c == ' ' || c == '\t') {
        ++i;
        continue;
      }
      if (c == '#') break;
      any = true;
      if (is_ident_start(c)) {
        std::size_t j = i;
        while (j < line.size() && is_ident_char(line[j])) ++j;
        out.push_back({Tok::Ident, std::string(line.substr(i, j - i)), line_no, col});
        i = j;
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && i + 1 < line.size() && std::isdigit(static_cast<unsigned char>(line[i + 1])))) {
        std::size_t j = i;
        bool is_float = false;
        while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
        if (j < line.size() && line[j] == '.') {
          is_float = true;
          ++j;
          while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
        }
        if (j < line.size() && (line[j] == 'e' || line[j] == 'E')) {
          std::size_t k = j + 1;
          if (k < line.size() && (line[k] == '+' || line[k] == '-')) ++k;
          if (k < line.size() && std::isdigit(static_cast<unsigned char>(line[k]))) {
            is_float = true;
            j = k;
            while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
          }
        }
        out.push_back({is_float ? Tok::Float : Tok::Int, std::string(line.substr(i, j - i)), line_no, col});
        i = j;
      } else {
        static constexpr std::string_view two[] = {"**", "==", "!=", "<=", ">="};
        std::string text(1, c);
        if (i + 1 < line.size()) {
          std::string_view pair = line.substr(i, 2);
          for (auto t : two) {
            if (pair == t) text = std::string(t);
          }
        }
        static constexpr std::string_view singles = "()[],:=+-*/%<>";
        if (text.size() == 1 && singles.find(c) == std::string_view::npos) {
          throw ParseError(line_no, col, std::string("unexpected character '") + c + "'");
        }
        if (text == "(" || text == "[") open.push_back({Tok::Punct, text, line_no, col});
        if (text == ")" || text == "]") {
          if (open.empty()) throw ParseError(line_no, col, "unbalanced '" + text + "'");
          const char want = open.back().text == "(" ? ')' : ']';
          if (text[0] != want) {
            throw ParseError(line_no, col, "'" + text + "' does not close '" + open.back().text + "' opened at line " +
                                               std::to_string(open.back().line) + ", column " +
                                               std::to_string(open.back().col));
          }
          open.pop_back();
        }
        out.push_back({Tok::Punct, text, line_no, col});
        i += text.size();
      }
    }
    continuing = !open.empty();
    if (any && !continuing) out.push_back({Tok::Newline, "", line_no, static_cast<int>(line.size()) + 1});
  }
  if (!open.empty()) {
    throw ParseError(open.back().line, open.back().col, "unclosed '" + open.back().text + "' at end of input");
  }
  while (indents.size() > 1) {
    indents.pop_back();
    out.push_back({Tok::Dedent, "", line_no + 1, 1});
  }
  out.push_back({Tok::End, "", line_no + 1, 1});
  return out;
}

const std::set<std::string, std::less<>> kKeywords = {
    "program", "param", "matrix", "output", "for", "in", "range", "if", "else", "and",
    "or", "not", "log", "log2", "ceiling", "floor", "def", "return", "input", "intermediate"};

class Parser {
 public:
  Parser(std::vector<Token> toks, std::span<const kernels::KernelSignature> kernels)
      : toks_(std::move(toks)), kernels_(kernels), assigned_(1) {}

  Program parse() {
    skip_newlines();
    if (peek().kind == Tok::End) fail(peek(), "empty program");
    while (peek().kind != Tok::End) {
      top_level();
      skip_newlines();
    }
    if (prog_.num_lines == 0) fail(peek(), "program contains no kernel calls");
    if (prog_.name.empty()) prog_.name = "main";
    return std::move(prog_);
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::span<const kernels::KernelSignature> kernels_;
  Program prog_;
  // Names visible in the current statement scope: loop variables and assigned scalars.
  std::vector<std::string> loop_vars_;
  std::vector<std::vector<std::string>> assigned_;

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }

  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw ParseError(t.line, t.col, msg);
  }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::Newline: return "end of line";
      case Tok::Indent: return "indent";
      case Tok::Dedent: return "dedent";
      case Tok::End: return "end of input";
      default: return "'" + t.text + "'";
    }
  }

  bool at_punct(std::string_view p) const {
    return peek().kind == Tok::Punct && peek().text == p;
  }
  bool at_keyword(std::string_view k) const {
    return peek().kind == Tok::Ident && peek().text == k;
  }

  void expect_punct(std::string_view p) {
    if (!at_punct(p)) fail(peek(), "expected '" + std::string(p) + "', found " + describe(peek()));
    next();
  }
  void expect_keyword(std::string_view k) {
    if (!at_keyword(k)) fail(peek(), "expected '" + std::string(k) + "', found " + describe(peek()));
    next();
  }
  void expect_newline() {
    if (peek().kind != Tok::Newline && peek().kind != Tok::End) {
      fail(peek(), "expected end of line, found " + describe(peek()));
    }
    if (peek().kind == Tok::Newline) next();
  }
  void skip_newlines() {
    while (peek().kind == Tok::Newline) next();
  }

  std::string expect_ident(std::string_view what) {
    const Token& t = peek();
    if (t.kind != Tok::Ident) fail(t, "expected " + std::string(what) + ", found " + describe(t));
    if (kKeywords.count(t.text)) fail(t, "'" + t.text + "' is a reserved word");
    next();
    return t.text;
  }

  std::int64_t expect_int() {
    const Token& t = peek();
    bool neg = false;
    if (at_punct("-")) {
      next();
      neg = true;
    }
    const Token& n = peek();
    if (n.kind != Tok::Int) fail(n, "expected integer, found " + describe(n));
    next();
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(n.text.data(), n.text.data() + n.text.size(), v);
    if (ec != std::errc{}) fail(t, "integer literal out of range");
    return neg ? -v : v;
  }

  bool name_in_scope(std::string_view n) const {
    if (prog_.find_param(n)) return true;
    if (std::find(loop_vars_.begin(), loop_vars_.end(), n) != loop_vars_.end()) return true;
    for (const auto& frame : assigned_) {
      if (std::find(frame.begin(), frame.end(), n) != frame.end()) return true;
    }
    return false;
  }

  void top_level() {
    const Token& t = peek();
    if (at_keyword("program")) {
      next();
      if (!prog_.name.empty()) fail(t, "duplicate program name");
      prog_.name = expect_ident("program name");
      expect_newline();
    } else if (at_keyword("param")) {
      next();
      const Token& nt = peek();
      Param p{expect_ident("parameter name"), std::nullopt};
      if (prog_.find_param(p.name) || prog_.find_matrix(p.name)) fail(nt, "duplicate name '" + p.name + "'");
      if (at_punct("=")) {
        next();
        p.value = expect_int();
      }
      prog_.params.push_back(std::move(p));
      expect_newline();
    } else if (at_keyword("matrix")) {
      next();
      const Token& nt = peek();
      MatrixDecl m;
      m.name = expect_ident("matrix name");
      if (prog_.find_matrix(m.name) || prog_.find_param(m.name)) fail(nt, "duplicate name '" + m.name + "'");
      expect_punct("[");
      const Token& at = peek();
      auto arity = expect_int();
      if (arity < 1 || arity > 8) fail(at, "matrix arity must be between 1 and 8");
      m.arity = static_cast<int>(arity);
      expect_punct("]");
      if (at_keyword("input")) {
        next();
        m.role = MatrixRole::Input;
      } else if (at_keyword("output")) {
        next();
        m.role = MatrixRole::Output;
      } else if (at_keyword("intermediate")) {
        next();
        m.role = MatrixRole::Intermediate;
      }
      prog_.matrices.push_back(std::move(m));
      expect_newline();
    } else if (at_keyword("output")) {
      next();
      output_clause();
      expect_newline();
    } else if (at_keyword("def")) {
      fail(t, "nested function definitions are not supported");
    } else {
      prog_.body.push_back(statement());
    }
  }

  void output_clause() {
    OutputClause clause;
    // Loop variables appear after the tile, so parse the tile lazily: record
    // its tokens' position, parse loops first, then rewind.
    std::size_t tile_pos = pos_;
    expect_ident("matrix name");
    if (!at_punct("[")) fail(peek(), "expected '[' after output matrix name");
    int bracket = 0;
    do {
      if (peek().kind == Tok::Newline || peek().kind == Tok::End) fail(peek(), "malformed output clause");
      if (at_punct("[")) ++bracket;
      if (at_punct("]")) --bracket;
      next();
    } while (bracket > 0);
    std::size_t after_tile = pos_;
    while (at_keyword("for")) {
      next();
      const Token& vt = peek();
      LoopSpec loop;
      loop.var = expect_ident("loop variable");
      if (name_in_scope(loop.var)) fail(vt, "loop variable '" + loop.var + "' shadows an existing name");
      expect_keyword("in");
      loop.range = range_spec();
      loop_vars_.push_back(loop.var);
      clause.loops.push_back(std::move(loop));
    }
    std::size_t end = pos_;
    pos_ = tile_pos;
    clause.tile = idx_expr();
    if (pos_ != after_tile) fail(peek(), "malformed output tile");
    pos_ = end;
    loop_vars_.resize(loop_vars_.size() - clause.loops.size());
    prog_.outputs.push_back(std::move(clause));
  }

  Range range_spec() {
    expect_keyword("range");
    expect_punct("(");
    std::vector<ExprPtr> args;
    args.push_back(expr());
    while (at_punct(",")) {
      next();
      args.push_back(expr());
    }
    const Token& close = peek();
    expect_punct(")");
    if (args.size() > 3) fail(close, "range takes at most 3 arguments");
    Range r;
    if (args.size() == 1) {
      r.lo = make_int(0);
      r.hi = args[0];
      r.step = make_int(1);
    } else {
      r.lo = args[0];
      r.hi = args[1];
      r.step = args.size() == 3 ? args[2] : make_int(1);
    }
    return r;
  }

  std::vector<Stmt> block() {
    expect_punct(":");
    if (peek().kind != Tok::Newline) fail(peek(), "expected end of line after ':'");
    next();
    if (peek().kind != Tok::Indent) fail(peek(), "expected an indented block");
    next();
    assigned_.emplace_back();
    std::vector<Stmt> body;
    while (peek().kind != Tok::Dedent && peek().kind != Tok::End) {
      if (at_keyword("def")) fail(peek(), "nested function definitions are not supported");
      if (at_keyword("param") || at_keyword("matrix") || at_keyword("output") || at_keyword("program")) {
        fail(peek(), "declarations are only allowed at top level");
      }
      body.push_back(statement());
    }
    if (peek().kind == Tok::Dedent) next();
    assigned_.pop_back();
    return body;
  }

  Stmt statement() {
    const Token& t = peek();
    if (at_keyword("for")) {
      next();
      For f;
      const Token& vt = peek();
      f.var = expect_ident("loop variable");
      if (name_in_scope(f.var)) fail(vt, "loop variable '" + f.var + "' shadows an existing name");
      expect_keyword("in");
      f.range = range_spec();
      loop_vars_.push_back(f.var);
      f.body = block();
      loop_vars_.pop_back();
      return Stmt{std::move(f)};
    }
    if (at_keyword("if")) {
      next();
      If s;
      s.cond = expr();
      s.then_body = block();
      if (at_keyword("else")) {
        next();
        s.else_body = block();
      }
      return Stmt{std::move(s)};
    }
    if (t.kind != Tok::Ident) fail(t, "expected a statement, found " + describe(t));
    if (peek(1).kind == Tok::Punct && peek(1).text == "=") {
      Assign a;
      a.name = expect_ident("variable name");
      if (prog_.find_param(a.name) ||
          std::find(loop_vars_.begin(), loop_vars_.end(), a.name) != loop_vars_.end()) {
        fail(t, "cannot assign to '" + a.name + "'");
      }
      if (prog_.find_matrix(a.name)) fail(t, "cannot assign to matrix '" + a.name + "' without an index");
      next();
      a.value = expr();
      expect_newline();
      assigned_.back().push_back(a.name);
      return Stmt{std::move(a)};
    }
    return kernel_call();
  }

  Stmt kernel_call() {
    KernelCall k;
    k.outputs.push_back(idx_expr());
    while (at_punct(",")) {
      next();
      k.outputs.push_back(idx_expr());
    }
    expect_punct("=");
    const Token& kt = peek();
    k.kernel = expect_ident("kernel name");
    if (k.kernel == prog_.name) fail(kt, "recursive call to '" + k.kernel + "'");
    const auto* sig = kernels::find_signature(kernels_, k.kernel);
    if (!sig) fail(kt, "unknown kernel '" + k.kernel + "'");
    expect_punct("(");
    if (!at_punct(")")) {
      argument(k);
      while (at_punct(",")) {
        next();
        argument(k);
      }
    }
    expect_punct(")");
    const int nin = static_cast<int>(k.inputs.size());
    if (nin < sig->min_inputs || nin > sig->max_inputs) {
      fail(kt, "kernel '" + k.kernel + "' takes " + std::to_string(sig->min_inputs) +
                   (sig->max_inputs != sig->min_inputs ? "-" + std::to_string(sig->max_inputs) : "") +
                   " matrix inputs, got " + std::to_string(nin));
    }
    if (static_cast<int>(k.outputs.size()) != sig->outputs) {
      fail(kt, "kernel '" + k.kernel + "' produces " + std::to_string(sig->outputs) + " outputs");
    }
    expect_newline();
    k.line_id = prog_.num_lines++;
    return Stmt{std::move(k)};
  }

  void argument(KernelCall& k) {
    if (peek().kind == Tok::Ident && peek(1).kind == Tok::Punct && peek(1).text == "[" &&
        prog_.find_matrix(peek().text)) {
      k.inputs.push_back(idx_expr());
    } else {
      k.scalars.push_back(expr());
    }
  }

  IdxExpr idx_expr() {
    const Token& t = peek();
    IdxExpr e;
    e.matrix = expect_ident("matrix name");
    const auto* decl = prog_.find_matrix(e.matrix);
    if (!decl) fail(t, "undeclared matrix '" + e.matrix + "'");
    expect_punct("[");
    e.indices.push_back(index_expr());
    while (at_punct(",")) {
      next();
      e.indices.push_back(index_expr());
    }
    expect_punct("]");
    if (static_cast<int>(e.indices.size()) != decl->arity) {
      fail(t, "matrix '" + e.matrix + "' has arity " + std::to_string(decl->arity) + ", indexed with " +
                  std::to_string(e.indices.size()) + " indices");
    }
    return e;
  }

  ExprPtr index_expr() { return expr(); }

  // Expression grammar, lowest precedence first.
  ExprPtr expr() {
    ExprPtr l = and_expr();
    while (at_keyword("or")) {
      next();
      l = make_binary(BinaryOp::Or, l, and_expr());
    }
    return l;
  }

  ExprPtr and_expr() {
    ExprPtr l = not_expr();
    while (at_keyword("and")) {
      next();
      l = make_binary(BinaryOp::And, l, not_expr());
    }
    return l;
  }

  ExprPtr not_expr() {
    if (at_keyword("not")) {
      next();
      return make_unary(UnaryOp::Not, not_expr());
    }
    return comparison();
  }

  ExprPtr comparison() {
    ExprPtr l = arith();
    static const std::pair<std::string_view, CompareOp> ops[] = {
        {"==", CompareOp::EQ}, {"!=", CompareOp::NE}, {"<", CompareOp::LT},
        {">", CompareOp::GT},  {"<=", CompareOp::LE}, {">=", CompareOp::GE}};
    for (const auto& [text, op] : ops) {
      if (at_punct(text)) {
        next();
        return make_compare(op, l, arith());
      }
    }
    return l;
  }

  ExprPtr arith() {
    ExprPtr l = term();
    while (at_punct("+") || at_punct("-")) {
      auto op = next().text == "+" ? BinaryOp::Add : BinaryOp::Sub;
      l = make_binary(op, l, term());
    }
    return l;
  }

  ExprPtr term() {
    ExprPtr l = unary();
    while (at_punct("*") || at_punct("/") || at_punct("%")) {
      const auto& t = next().text;
      auto op = t == "*" ? BinaryOp::Mul : (t == "/" ? BinaryOp::Div : BinaryOp::Mod);
      l = make_binary(op, l, unary());
    }
    return l;
  }

  ExprPtr unary() {
    if (at_punct("-")) {
      next();
      if (peek().kind == Tok::Int && !(peek(1).kind == Tok::Punct && peek(1).text == "**")) {
        return make_int(-parse_int_literal(next()));
      }
      if (peek().kind == Tok::Float && !(peek(1).kind == Tok::Punct && peek(1).text == "**")) {
        return make_float(-parse_float_literal(next()));
      }
      return make_unary(UnaryOp::Neg, unary());
    }
    return power();
  }

  ExprPtr power() {
    const Token& t = peek();
    ExprPtr base = atom();
    if (at_punct("**")) {
      next();
      const auto* c = std::get_if<IntConst>(&base->node);
      if (!c) fail(t, "the base of '**' must be an integer literal");
      return make_pow(c->value, unary());
    }
    return base;
  }

  std::int64_t parse_int_literal(const Token& t) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{}) fail(t, "integer literal out of range");
    return v;
  }

  double parse_float_literal(const Token& t) {
    try {
      return std::stod(t.text);
    } catch (const std::exception&) {
      fail(t, "malformed float literal");
    }
  }

  ExprPtr atom() {
    const Token& t = peek();
    if (t.kind == Tok::Int) return make_int(parse_int_literal(next()));
    if (t.kind == Tok::Float) return make_float(parse_float_literal(next()));
    if (at_punct("(")) {
      next();
      ExprPtr e = expr();
      expect_punct(")");
      return e;
    }
    if (t.kind == Tok::Ident) {
      static const std::pair<std::string_view, UnaryOp> fns[] = {
          {"log", UnaryOp::Log}, {"log2", UnaryOp::Log2}, {"ceiling", UnaryOp::Ceiling},
          {"floor", UnaryOp::Floor}};
      for (const auto& [name, op] : fns) {
        if (t.text == name) {
          next();
          expect_punct("(");
          ExprPtr e = expr();
          expect_punct(")");
          return make_unary(op, e);
        }
      }
      std::string name = expect_ident("expression");
      if (prog_.find_matrix(name)) fail(t, "matrix '" + name + "' cannot be used as a scalar");
      if (!name_in_scope(name)) fail(t, "unknown name '" + name + "'");
      return make_ref(std::move(name));
    }
    fail(t, "expected an expression, found " + describe(t));
  }
};

// Printer. Precedence levels mirror the parser: higher binds tighter.
enum Prec { kOr = 1, kAnd, kNot, kCmp, kAdd, kMul, kUnary, kPow, kAtom };

int prec_of(const Expr& e) {
  return std::visit(
      [](const auto& n) -> int {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, BinaryExpr>) {
          switch (n.op) {
            case BinaryOp::Or: return kOr;
            case BinaryOp::And: return kAnd;
            case BinaryOp::Add:
            case BinaryOp::Sub: return kAdd;
            default: return kMul;
          }
        } else if constexpr (std::is_same_v<T, CompareExpr>) {
          return kCmp;
        } else if constexpr (std::is_same_v<T, UnaryExpr>) {
          if (n.op == UnaryOp::Neg) return kUnary;
          if (n.op == UnaryOp::Not) return kNot;
          return kAtom;
        } else if constexpr (std::is_same_v<T, PowExpr>) {
          return kPow;
        } else if constexpr (std::is_same_v<T, IntConst>) {
          return n.value < 0 ? kUnary : kAtom;
        } else if constexpr (std::is_same_v<T, FloatConst>) {
          return n.value < 0 || std::signbit(n.value) ? kUnary : kAtom;
        } else {
          return kAtom;
        }
      },
      e.node);
}

std::string format_float(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, p);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void print(const Expr& e, std::string& out);

void print_child(const Expr& e, int min_prec, std::string& out) {
  if (prec_of(e) < min_prec) {
    out += '(';
    print(e, out);
    out += ')';
  } else {
    print(e, out);
  }
}

void print(const Expr& e, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, IntConst>) {
          out += std::to_string(n.value);
        } else if constexpr (std::is_same_v<T, FloatConst>) {
          out += format_float(n.value);
        } else if constexpr (std::is_same_v<T, RefExpr>) {
          out += n.name;
        } else if constexpr (std::is_same_v<T, PowExpr>) {
          out += std::to_string(n.base);
          out += "**";
          // Exponent binds as a unary expression; anything looser needs parens.
          print_child(*n.exponent, kAtom, out);
        } else if constexpr (std::is_same_v<T, UnaryExpr>) {
          switch (n.op) {
            case UnaryOp::Neg:
              out += '-';
              // Avoid "--" and "-3" ambiguity for literal operands.
              print_child(*n.operand, prec_of(*n.operand) == kAtom &&
                                              (std::holds_alternative<IntConst>(n.operand->node) ||
                                               std::holds_alternative<FloatConst>(n.operand->node))
                                          ? kAtom + 1
                                          : kPow,
                          out);
              break;
            case UnaryOp::Not:
              out += "not ";
              print_child(*n.operand, kNot, out);
              break;
            default: {
              static const char* names[] = {"", "", "log", "ceiling", "floor", "log2"};
              out += names[static_cast<int>(n.op)];
              out += '(';
              print(*n.operand, out);
              out += ')';
            }
          }
        } else if constexpr (std::is_same_v<T, CompareExpr>) {
          static const char* ops[] = {" == ", " != ", " < ", " > ", " <= ", " >= "};
          print_child(*n.left, kAdd, out);
          out += ops[static_cast<int>(n.op)];
          print_child(*n.right, kAdd, out);
        } else {
          int p = prec_of(e);
          static const char* ops[] = {"+", "-", "*", "/", "%", " and ", " or "};
          print_child(*n.left, p, out);
          out += ops[static_cast<int>(n.op)];
          print_child(*n.right, p + 1, out);
        }
      },
      e.node);
}

void print_range(const Range& r, std::string& out) {
  out += "range(";
  print(*r.lo, out);
  out += ", ";
  print(*r.hi, out);
  const auto* step = std::get_if<IntConst>(&r.step->node);
  if (!step || step->value != 1) {
    out += ", ";
    print(*r.step, out);
  }
  out += ')';
}

void print_stmts(const std::vector<Stmt>& body, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 4, ' ');
  for (const auto& s : body) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          out += pad;
          if constexpr (std::is_same_v<T, KernelCall>) {
            for (std::size_t i = 0; i < n.outputs.size(); ++i) {
              if (i) out += ", ";
              out += print_idx(n.outputs[i]);
            }
            out += " = " + n.kernel + "(";
            bool first = true;
            for (const auto& in : n.inputs) {
              if (!first) out += ", ";
              first = false;
              out += print_idx(in);
            }
            for (const auto& sc : n.scalars) {
              if (!first) out += ", ";
              first = false;
              print(*sc, out);
            }
            out += ")\n";
          } else if constexpr (std::is_same_v<T, Assign>) {
            out += n.name + " = ";
            print(*n.value, out);
            out += '\n';
          } else if constexpr (std::is_same_v<T, If>) {
            out += "if ";
            print(*n.cond, out);
            out += ":\n";
            print_stmts(n.then_body, indent + 1, out);
            if (!n.else_body.empty()) {
              out += pad + "else:\n";
              print_stmts(n.else_body, indent + 1, out);
            }
          } else {
            out += "for " + n.var + " in ";
            print_range(n.range, out);
            out += ":\n";
            print_stmts(n.body, indent + 1, out);
          }
        },
        s.node);
  }
}

}  // namespace

Program parse_program(std::string_view source, std::span<const kernels::KernelSignature> kernels) {
  Parser p(tokenize(source), kernels);
  return p.parse();
}

std::string print_expr(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

std::string print_idx(const IdxExpr& e) {
  std::string out = e.matrix + "[";
  for (std::size_t i = 0; i < e.indices.size(); ++i) {
    if (i) out += ',';
    print(*e.indices[i], out);
  }
  return out + "]";
}

std::string print_program(const Program& p) {
  std::string out = "program " + p.name + "\n";
  for (const auto& prm : p.params) {
    out += "param " + prm.name;
    if (prm.value) out += " = " + std::to_string(*prm.value);
    out += '\n';
  }
  for (const auto& m : p.matrices) {
    static const char* roles[] = {"input", "intermediate", "output"};
    out += "matrix " + m.name + "[" + std::to_string(m.arity) + "] " + roles[static_cast<int>(m.role)] + "\n";
  }
  for (const auto& o : p.outputs) {
    out += "output " + print_idx(o.tile);
    for (const auto& l : o.loops) {
      out += " for " + l.var + " in ";
      print_range(l.range, out);
    }
    out += '\n';
  }
  out += '\n';
  print_stmts(p.body, 0, out);
  return out;
}

Program with_params(Program p, const Binding& params) {
  for (auto& prm : p.params) {
    if (auto it = params.find(prm.name); it != params.end()) prm.value = it->second;
  }
  return p;
}

Binding resolve_params(const Program& p, const Binding& overrides) {
  Binding out;
  for (const auto& [name, value] : overrides) {
    if (!p.find_param(name)) throw EvalError("program '" + p.name + "' has no parameter '" + name + "'");
  }
  for (const auto& prm : p.params) {
    if (auto it = overrides.find(prm.name); it != overrides.end()) {
      out[prm.name] = it->second;
    } else if (prm.value) {
      out[prm.name] = *prm.value;
    } else {
      throw EvalError("unbound parameter '" + prm.name + "'");
    }
  }
  return out;
}

}  // namespace lambdapack::lang
