#pragma once

#include <string>
#include <vector>

namespace mixtrade {

// Full command-line entry point, minus the program name. Returns the
// process exit code: 0 success, 1 user/config/data error, 2 numerical
// abort. All file outputs are deterministic for a fixed command line,
// config and data, so repeated runs produce byte-identical artifacts.
int run_cli(const std::vector<std::string>& args);

}  // namespace mixtrade
