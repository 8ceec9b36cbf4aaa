#pragma once

namespace eegnet {

inline constexpr const char* kToolName = "eegnet";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace eegnet
