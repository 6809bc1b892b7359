#pragma once

namespace vermin {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vermin
