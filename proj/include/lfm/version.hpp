#pragma once

namespace lfm {
inline constexpr const char* kVersion = "0.1.0";
}
