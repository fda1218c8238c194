#include "lambdapack/lang/eval.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "lambdapack/error.hpp"

namespace lambdapack::lang {

namespace {

// `v` is taken by reference so it is read only after the overflow builtin has stored it.
std::int64_t checked(bool overflow, const std::int64_t& v) {
  if (overflow) throw EvalError("integer overflow");
  return v;
}

double as_double(const Value& v) {
  return std::visit([](auto x) { return static_cast<double>(x); }, v);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  if (b == -1 && a == std::numeric_limits<std::int64_t>::min()) throw EvalError("integer overflow");
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
  if (b == -1) return 0;
  std::int64_t r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) r += b;
  return r;
}

std::int64_t ipow(std::int64_t base, std::int64_t exp) {
  std::int64_t result = 1;
  for (std::int64_t i = 0; i < exp; ++i) {
    std::int64_t next;
    if (__builtin_mul_overflow(result, base, &next)) throw EvalError("integer overflow in power");
    result = next;
    if (result == 0 || result == 1) break;
  }
  return result;
}

std::int64_t to_int_checked(double d) {
  if (!std::isfinite(d) || d < -9.2e18 || d > 9.2e18) {
    throw EvalError("value out of integer range");
  }
  return static_cast<std::int64_t>(d);
}

template <typename Scope>
struct Evaluator {
  const Scope& scope;
  EvalMode mode;

  Value lookup(const std::string& name) const {
    auto it = scope.find(name);
    if (it == scope.end()) throw EvalError("unbound reference '" + name + "'");
    return Value(it->second);
  }

  Value operator()(const Expr& e) const {
    return std::visit([&](const auto& n) { return eval(n); }, e.node);
  }

  Value eval(const IntConst& c) const { return c.value; }
  Value eval(const FloatConst& c) const { return c.value; }
  Value eval(const RefExpr& r) const { return lookup(r.name); }

  Value eval(const PowExpr& p) const {
    Value exp = (*this)(*p.exponent);
    if (const auto* i = std::get_if<std::int64_t>(&exp); i && *i >= 0) {
      return ipow(p.base, *i);
    }
    return std::pow(static_cast<double>(p.base), as_double(exp));
  }

  Value eval(const UnaryExpr& u) const {
    Value v = (*this)(*u.operand);
    switch (u.op) {
      case UnaryOp::Neg:
        if (const auto* i = std::get_if<std::int64_t>(&v)) {
          if (*i == std::numeric_limits<std::int64_t>::min()) throw EvalError("integer overflow");
          return -*i;
        }
        return -std::get<double>(v);
      case UnaryOp::Not:
        return std::int64_t{truthy(v) ? 0 : 1};
      case UnaryOp::Log: {
        double d = as_double(v);
        if (d <= 0) throw EvalError("log of non-positive value");
        return std::log(d);
      }
      case UnaryOp::Log2: {
        if (const auto* i = std::get_if<std::int64_t>(&v)) {
          if (*i <= 0) throw EvalError("log2 of non-positive value");
          if ((*i & (*i - 1)) == 0) return std::int64_t{63 - __builtin_clzll(static_cast<unsigned long long>(*i))};
          return std::log2(static_cast<double>(*i));
        }
        double d = std::get<double>(v);
        if (d <= 0) throw EvalError("log2 of non-positive value");
        return std::log2(d);
      }
      case UnaryOp::Ceiling:
        if (std::holds_alternative<std::int64_t>(v)) return v;
        return to_int_checked(std::ceil(std::get<double>(v)));
      case UnaryOp::Floor:
        if (std::holds_alternative<std::int64_t>(v)) return v;
        return to_int_checked(std::floor(std::get<double>(v)));
    }
    throw EvalError("unknown unary operator");
  }

  Value eval(const CompareExpr& c) const {
    Value l = (*this)(*c.left);
    Value r = (*this)(*c.right);
    int cmp;
    if (std::holds_alternative<std::int64_t>(l) && std::holds_alternative<std::int64_t>(r)) {
      auto a = std::get<std::int64_t>(l);
      auto b = std::get<std::int64_t>(r);
      cmp = a < b ? -1 : (a > b ? 1 : 0);
    } else {
      double a = as_double(l);
      double b = as_double(r);
      cmp = a < b ? -1 : (a > b ? 1 : 0);
    }
    bool out = false;
    switch (c.op) {
      case CompareOp::EQ: out = cmp == 0; break;
      case CompareOp::NE: out = cmp != 0; break;
      case CompareOp::LT: out = cmp < 0; break;
      case CompareOp::GT: out = cmp > 0; break;
      case CompareOp::LE: out = cmp <= 0; break;
      case CompareOp::GE: out = cmp >= 0; break;
    }
    return std::int64_t{out ? 1 : 0};
  }

  Value eval(const BinaryExpr& b) const {
    if (b.op == BinaryOp::And) {
      if (!truthy((*this)(*b.left))) return std::int64_t{0};
      return std::int64_t{truthy((*this)(*b.right)) ? 1 : 0};
    }
    if (b.op == BinaryOp::Or) {
      if (truthy((*this)(*b.left))) return std::int64_t{1};
      return std::int64_t{truthy((*this)(*b.right)) ? 1 : 0};
    }
    Value l = (*this)(*b.left);
    Value r = (*this)(*b.right);
    const auto* li = std::get_if<std::int64_t>(&l);
    const auto* ri = std::get_if<std::int64_t>(&r);
    if (li && ri) {
      std::int64_t a = *li;
      std::int64_t c = *ri;
      std::int64_t out;
      switch (b.op) {
        case BinaryOp::Add: return checked(__builtin_add_overflow(a, c, &out), out);
        case BinaryOp::Sub: return checked(__builtin_sub_overflow(a, c, &out), out);
        case BinaryOp::Mul: return checked(__builtin_mul_overflow(a, c, &out), out);
        case BinaryOp::Div:
          if (c == 0) throw EvalError("division by zero");
          if (mode == EvalMode::Index && a % c != 0) {
            throw EvalError("inexact division " + std::to_string(a) + "/" + std::to_string(c) +
                            " in index expression");
          }
          return floor_div(a, c);
        case BinaryOp::Mod:
          if (c == 0) throw EvalError("modulo by zero");
          return floor_mod(a, c);
        default: break;
      }
      throw EvalError("unknown binary operator");
    }
    double a = as_double(l);
    double c = as_double(r);
    switch (b.op) {
      case BinaryOp::Add: return a + c;
      case BinaryOp::Sub: return a - c;
      case BinaryOp::Mul: return a * c;
      case BinaryOp::Div:
        if (c == 0) throw EvalError("division by zero");
        return a / c;
      case BinaryOp::Mod: {
        if (c == 0) throw EvalError("modulo by zero");
        double m = std::fmod(a, c);
        if (m != 0 && ((m < 0) != (c < 0))) m += c;
        return m;
      }
      default: break;
    }
    throw EvalError("unknown binary operator");
  }
};

std::int64_t require_int(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  double d = std::get<double>(v);
  if (!std::isfinite(d) || d != std::floor(d)) {
    throw EvalError("expected an integer, got " + to_string(v));
  }
  return to_int_checked(d);
}

}  // namespace

Value eval_scalar(const Expr& e, const Binding& scope, EvalMode mode) {
  return Evaluator<Binding>{scope, mode}(e);
}

Value eval_scalar(const Expr& e, const ValueScope& scope, EvalMode mode) {
  return Evaluator<ValueScope>{scope, mode}(e);
}

std::int64_t eval_int(const Expr& e, const Binding& scope, EvalMode mode) {
  return require_int(eval_scalar(e, scope, mode));
}

std::int64_t eval_int(const Expr& e, const ValueScope& scope, EvalMode mode) {
  return require_int(eval_scalar(e, scope, mode));
}

bool truthy(const Value& v) {
  return std::visit([](auto x) { return x != 0; }, v);
}

std::string to_string(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  std::ostringstream os;
  os.precision(17);
  os << std::get<double>(v);
  return os.str();
}

}  // namespace lambdapack::lang
