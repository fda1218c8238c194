#include "lambdapack/harness/programs.hpp"

#include <sstream>

#include "lambdapack/error.hpp"
#include "lambdapack/lang/parser.hpp"

namespace lambdapack::harness {

namespace {

bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"cholesky", "tsqr", "gemm"};
  return names;
}

std::string builtin_source(std::string_view name, const lang::Binding& params) {
  std::string src;
  if (name == "cholesky") src = detail::kCholeskySource;
  else if (name == "tsqr") src = detail::kTsqrSource;
  else if (name == "gemm") src = detail::kGemmSource;
  else throw Error("unknown builtin program '" + std::string(name) + "'");

  for (const auto& [param, value] : params) {
    const std::string decl = "param " + param;
    std::istringstream in(src);
    std::string out, line;
    bool found = false;
    while (std::getline(in, line)) {
      if (line.starts_with(decl) && (line.size() == decl.size() || line.substr(decl.size()).starts_with(" ="))) {
        line = decl + " = " + std::to_string(value);
        found = true;
      }
      out += line + "\n";
    }
    if (!found) throw Error("builtin program '" + std::string(name) + "' has no parameter '" + param + "'");
    src = std::move(out);
  }
  return src;
}

lang::Program gen_cholesky(std::int64_t b) {
  if (b < 1) throw Error("cholesky grid must be at least 1");
  return lang::parse_program(builtin_source("cholesky", {{"N", b}}));
}

lang::Program gen_tsqr(std::int64_t n) {
  if (!is_power_of_two(n)) throw Error("tsqr leaf count must be a power of two");
  return lang::parse_program(builtin_source("tsqr", {{"N", n}}));
}

lang::Program gen_gemm(std::int64_t b, std::int64_t k) {
  if (b < 1) throw Error("gemm grid must be at least 1");
  if (!is_power_of_two(k)) throw Error("gemm inner block count must be a power of two");
  return lang::parse_program(builtin_source("gemm", {{"N", b}, {"K", k}}));
}

}  // namespace lambdapack::harness
