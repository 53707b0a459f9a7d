#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitComputation = 1;
inline constexpr int kExitUsage = 2;

/// Runs one cattool invocation. `args` includes the program name. Reports go
/// to `out`; logs and error JSON go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cat::cli
