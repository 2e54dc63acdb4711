#pragma once

namespace skillguard {

inline constexpr const char* kToolName = "skillguard";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace skillguard
