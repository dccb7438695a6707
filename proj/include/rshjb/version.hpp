#pragma once

namespace rshjb {

inline constexpr const char* kToolVersion = "rshjb 0.1.0";

}  // namespace rshjb
