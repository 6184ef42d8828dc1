#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rubricrl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1; // partial failure or failed validation
inline constexpr int kExitUsage = 2;   // bad arguments or unusable input

// Entry point of the rubricrl tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rubricrl
