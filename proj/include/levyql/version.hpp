#pragma once

namespace levyql {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace levyql
