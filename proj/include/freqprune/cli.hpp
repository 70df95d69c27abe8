#pragma once

#include <string>
#include <vector>

namespace freqprune::cli {

// Exit codes: 0 success, 1 validation error, 2 I/O error, 3 verification failure.
int run(const std::vector<std::string>& args);

}  // namespace freqprune::cli
