#pragma once

namespace aif {

inline constexpr const char* kToolName = "aif";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace aif
