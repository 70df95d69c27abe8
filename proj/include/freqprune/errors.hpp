#pragma once

#include <stdexcept>
#include <string>

namespace freqprune {

// Bad arguments, shape mismatches, malformed configs.
struct validation_error : std::invalid_argument {
    explicit validation_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Missing files, short reads, bad magic bytes.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace freqprune
