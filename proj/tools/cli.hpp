// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dna::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kConfigError = 2;

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace dna::cli
