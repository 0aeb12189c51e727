#pragma once

namespace crashsurr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace crashsurr
