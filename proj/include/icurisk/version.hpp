#pragma once

namespace icurisk {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace icurisk
