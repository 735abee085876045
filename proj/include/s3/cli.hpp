#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace s3::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Runs one subcommand. `args` excludes the program name. Errors are printed to
/// `err` as a single `error: ...` line and mapped to the exit codes above.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace s3::cli
