#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vpanel {

/// Entry point behind the `vpanel` binary. `args` excludes the program name.
/// Exit codes: 0 success, 1 domain error (stderr line "error: <Kind>: ..."),
/// 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vpanel
