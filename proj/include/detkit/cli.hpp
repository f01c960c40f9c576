#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace detkit::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kInput = 3,
  kNumeric = 4,
};

/// Runs one subcommand (assign, evaluate, stats, split, synth, bda-check).
/// Results go to `out` unless --output names a file; failures print a JSON
/// object {"error": {"code", "kind", "message"}} to `err`. `in` backs the
/// "-" path for --scenario.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in);

int run(int argc, const char* const* argv);

}  // namespace detkit::cli
