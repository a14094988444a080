#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace airisk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // validation or domain error
inline constexpr int kExitUsage = 2;

/// Runs the `airisk` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace airisk::cli
