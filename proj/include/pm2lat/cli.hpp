#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pm2lat::cli {

// Exit codes: 0 ok, 1 usage, 2 data/validation, 3 prediction, 4 I/O.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitPrediction = 3;
inline constexpr int kExitIo = 4;

// Runs one invocation. args[0] is the program name. Machine output goes to
// `out` (unless --output redirects it to a file); diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pm2lat::cli
