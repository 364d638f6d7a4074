#pragma once

#include <string>
#include <vector>

namespace docaug::cli {

// Runs one CLI invocation (args exclude the program name).
// Exit codes: 0 success, 1 configuration/input error, 2 total generation failure.
int run(const std::vector<std::string>& args);

}  // namespace docaug::cli
