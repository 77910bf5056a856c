#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace entransformer {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

// Runs one command. `args` excludes the program name. Progress goes to `out`,
// diagnostics to `err`.
//
//   train    --config --data --out [--seed] [--set key=value]...
//   forecast --checkpoint --data --out [--samples 100] [--seed]
//   evaluate --ensemble... --truth --out [--unnormalized] [--qq-points 100] [--dataset]
//   tune     --config --data --out --budget [--space] [--seed] [--set key=value]...
//   rank     --scores --out [--alpha 0.05]
//   rerun    --manifest [--out]
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace entransformer
