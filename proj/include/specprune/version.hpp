#pragma once

namespace specprune {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace specprune
