#pragma once

namespace nfg {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace nfg
