#pragma once

namespace cat {

inline constexpr const char* kVersion = "0.3.0";

}  // namespace cat
