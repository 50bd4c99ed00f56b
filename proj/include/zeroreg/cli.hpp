#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace zeroreg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point behind the `zeroreg` binary. `args` excludes the program name.
/// Returns 0 on success, 1 on usage or validation errors, 2 on runtime failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zeroreg::cli
