#pragma once

namespace skewflow {

inline constexpr const char* kToolName = "skewflow";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace skewflow
