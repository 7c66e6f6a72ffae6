#pragma once

// Command-line front end: gen, fit, check, verify-lssc and sweep.
//
// Exit codes: 0 ok, 2 config or IO error, 3 generation or domain error,
// 4 non-convergence, 5 a check failed.

#include <iosfwd>
#include <string>
#include <vector>

namespace sparsist::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kGenerationError = 3, kNotConverged = 4, kCheckFailed = 5 };

/// Runs one command; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

} // namespace sparsist::cli
