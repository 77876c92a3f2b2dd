#pragma once

#include <string>
#include <vector>

namespace dfxcli {

/// Dispatches one CLI invocation. `args` excludes the program name.
/// Returns 0 on success, 1 on usage/validation errors, 2 on runtime
/// failures.
int run_command(const std::vector<std::string>& args);

}  // namespace dfxcli
