#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cofc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point of the command-line tool. `args` excludes the program name.
/// Diagnostics go to `err` as one JSON object per failure.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cofc
