#pragma once

namespace hifd {
inline constexpr const char* kVersion = "0.1.0";
}
