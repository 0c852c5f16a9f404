#pragma once

#include <string>
#include <vector>

namespace hbvsde::cli {

/// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 1 anything else (I/O).
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

int run(int argc, char** argv);

/// Same as run(argc, argv); args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace hbvsde::cli
