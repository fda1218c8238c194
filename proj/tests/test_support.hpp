#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "lambdapack/lang/ast.hpp"
#include "lambdapack/lang/parser.hpp"

namespace lambdapack::testing {

inline std::string read_program_source(const std::string& name) {
  std::ifstream in(std::string(LAMBDAPACK_PROGRAMS_DIR) + "/" + name + ".lp");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline lang::Program load_program(const std::string& name) {
  return lang::parse_program(read_program_source(name));
}

}  // namespace lambdapack::testing
