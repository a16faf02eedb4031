#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tomsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

// Runs one tom-sim invocation. `args` excludes the program name. The JSON
// summary line goes to `out`; help, warnings and errors go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tomsim::cli
