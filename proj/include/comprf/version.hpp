#pragma once

namespace comprf {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace comprf
