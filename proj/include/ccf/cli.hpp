#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace ccf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

int exit_code_for(const std::exception& e);

// Runs the ccfuse command line; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ccf
