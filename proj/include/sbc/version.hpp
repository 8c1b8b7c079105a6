#pragma once

namespace sbc {

inline constexpr const char* kVersion = "0.1.0";

} // namespace sbc
