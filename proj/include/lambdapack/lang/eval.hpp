#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>

#include "lambdapack/lang/ast.hpp"

namespace lambdapack::lang {

using Value = std::variant<std::int64_t, double>;
using ValueScope = std::map<std::string, Value, std::less<>>;

/// Integer division is floor division in scalar context and must be exact in
/// index context, where an inexact quotient raises EvalError.
enum class EvalMode { Scalar, Index };

Value eval_scalar(const Expr& e, const Binding& scope, EvalMode mode = EvalMode::Scalar);
Value eval_scalar(const Expr& e, const ValueScope& scope, EvalMode mode = EvalMode::Scalar);

/// Evaluates and requires an integral result (floats with integral value are accepted).
std::int64_t eval_int(const Expr& e, const Binding& scope, EvalMode mode = EvalMode::Scalar);
std::int64_t eval_int(const Expr& e, const ValueScope& scope, EvalMode mode = EvalMode::Scalar);

bool truthy(const Value& v);
std::string to_string(const Value& v);

}  // namespace lambdapack::lang
