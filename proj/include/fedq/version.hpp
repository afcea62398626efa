#pragma once

namespace fedq {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fedq
