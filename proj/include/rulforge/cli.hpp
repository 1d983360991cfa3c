#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rulforge {

// In-process entry point behind the rulforge binary; tests and bindings call
// it directly. Returns the process exit code: 0 success, 2 usage or
// configuration error, 3 data or validation error, 4 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace rulforge
