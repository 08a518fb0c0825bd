#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lsr {

// Runs one subcommand (args exclude the program name) and returns the
// process exit code: 0 ok, 2 config, 3 data, 4 llm, 5 io.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lsr
