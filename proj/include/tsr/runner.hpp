#ifndef TSR_RUNNER_HPP
#define TSR_RUNNER_HPP

#include <string>

#include "tsr/config.hpp"

namespace tsr {

// Executes one subcommand (generate | train | ablate-sharing | probe-depth |
// transfer | consistency | report) against a validated config. Throws the
// library error types; exit-code mapping happens at the C API boundary.
void run_command(const std::string& command, const RunConfig& cfg);

// Exit codes shared by the C API and the CLI.
int exit_code_for_current_exception();

}  // namespace tsr

#endif
