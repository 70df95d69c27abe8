#pragma once

namespace freqprune {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace freqprune
