#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sluxfer {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

// Runs one `slu` invocation; args excludes the program name. Returns the
// process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sluxfer
