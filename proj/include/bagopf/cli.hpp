#pragma once

// Command-line front end. Every flag also reads an environment variable
// named BAGOPF_<FLAG> (upper case, dashes as underscores); the flag wins.

#include <iosfwd>
#include <string>

#include "bagopf/conic.hpp"
#include "bagopf/noa.hpp"

namespace bagopf {

enum ExitCode : int {
  exit_ok = 0,
  exit_internal = 1,
  exit_usage = 2,
  exit_not_converged = 3,
  exit_infeasible = 4,
};

struct RunConfig {
  enum class Command { solve, decompose, relax_only, verify };

  std::string input;
  std::string format;  ///< "matpower", "native" or empty to infer
  Command command = Command::solve;
  NoaOptions noa;
  BackendOptions backend;
  bool structured = false;
  std::string trace_out;
  std::string solution_out;
  std::string solution_in;  ///< verify: solution export to check
  double verify_tol = 1e-4;
  bool show_bags = false;
  bool full_lifting = false;  ///< one bag holding every bus

  /// Throws ValidationError when an override breaks an option invariant.
  void validate() const;
};

int cmd_decompose(const RunConfig& config, std::ostream& out);
int cmd_solve(const RunConfig& config, std::ostream& out);
int cmd_relax_only(const RunConfig& config, std::ostream& out);
int cmd_verify(const RunConfig& config, std::ostream& out);

/// Parses arguments, dispatches, and maps errors to exit codes. Messages go
/// to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bagopf
