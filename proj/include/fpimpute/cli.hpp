#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fpimpute {

// Environment variable naming the default output directory of bench and
// init-study when neither --out nor the spec sets one.
inline constexpr const char* kOutputDirEnv = "FPIMPUTE_OUTPUT_DIR";

// Runs the command line `args` (without the program name). Returns the exit
// code: 0 success, 1 usage or configuration error, 2 data error, 3 numeric
// error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fpimpute
