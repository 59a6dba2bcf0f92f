#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace episteady::cli {

// Process exit statuses. Reports go to `out` as key=value lines; warnings and errors to `err`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitNotEpisodic = 3;
inline constexpr int kExitSolver = 4;

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace episteady::cli
