#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace langevin::cli {

/// Subcommands: run, budget, probe, gibbs-check, certify, compare.
/// Results go to `out` as JSON; failures print {"error": {...}} to `err` and
/// return nonzero (1 for runtime failures, 2 for usage errors).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace langevin::cli
