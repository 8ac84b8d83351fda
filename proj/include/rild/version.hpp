#pragma once

namespace rild {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rild
