#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "blockcirc/error.hpp"

namespace blockcirc::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitValidation = 4;
inline constexpr int kExitFeasibility = 5;
inline constexpr int kExitVerifyFailed = 6;

int exit_code(ErrorKind kind) noexcept;

// Runs one command; args exclude the program name. Normal output goes to
// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace blockcirc::cli
