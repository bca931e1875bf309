#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace v2a::cli {

// Exit codes returned by run().
enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// Parses `args` (without the program name) and runs one subcommand:
// preprocess, train-encoder, train-decoder, infer, eval, export-artifacts,
// grad-check. Help and results go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace v2a::cli
