#pragma once

namespace catshaper {

inline constexpr const char* kVersion = "0.1.0";

} // namespace catshaper
