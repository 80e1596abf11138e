#ifndef FPT_COMMANDS_HPP
#define FPT_COMMANDS_HPP

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fpt/scenario.hpp"

namespace fpt {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,     // unexpected error
  kExitDiverged = 2,    // solver diverged or Picard window too long
  kExitConfig = 3,      // bad scenario, too few hits
  kExitValidation = 4,  // a check failed
};

struct CommandOptions {
  std::string scenario;                // path to the scenario JSON
  std::string out;                     // output directory; empty uses the scenario's
  std::optional<std::uint64_t> seed;   // overrides montecarlo.seed
  int threads = 0;                     // 0 falls back to FPT_THREADS, then 1
};

/// One row of the validate or compare table.
struct CheckRow {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string detail;
};

/// Runs solve | simulate | validate | compare, writing artifacts under the output directory and
/// progress plus diagnostics to `log`. Returns the exit code; never throws.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& log);

/// The validate checks on an already loaded scenario.
std::vector<CheckRow> validation_rows(const Scenario& scenario, int threads);

/// Scientific notation with 17 significant digits.
std::string format_real(double value);

}  // namespace fpt

#endif  // FPT_COMMANDS_HPP
