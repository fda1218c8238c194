#pragma once

#include <span>
#include <string>
#include <string_view>

#include "lambdapack/kernels/signature.hpp"
#include "lambdapack/lang/ast.hpp"

namespace lambdapack::lang {

/// Parses a `.lp` program. Kernel calls are checked against `kernels`; line ids
/// are assigned to kernel calls in source order starting at 0.
/// Throws ParseError.
Program parse_program(std::string_view source,
                      std::span<const kernels::KernelSignature> kernels =
                          kernels::builtin_signatures());

/// Canonical source text; parse_program(print_program(p)) is structurally equal to p.
std::string print_program(const Program& p);
std::string print_expr(const Expr& e);
std::string print_idx(const IdxExpr& e);

/// Binds parameter values into a copy of the program (used for serialization).
Program with_params(Program p, const Binding& params);

/// Parameter values declared in the program, overridden by `overrides`.
/// Throws EvalError when a parameter is left unbound.
Binding resolve_params(const Program& p, const Binding& overrides = {});

}  // namespace lambdapack::lang
