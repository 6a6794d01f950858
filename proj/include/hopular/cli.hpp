#pragma once

#include <string>
#include <vector>

namespace hopular {

// Entry point shared by the binary and the tests. args excludes argv[0].
// Returns the process exit status: 0 on success, 2 on usage errors, 1 on
// runtime failures.
int run_cli(const std::vector<std::string>& args);

}  // namespace hopular
