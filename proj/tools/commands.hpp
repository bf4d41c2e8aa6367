#pragma once

#include <string>
#include <vector>

namespace surfer::cli {

// Parses the command line and runs one subcommand. Returns the exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace surfer::cli
