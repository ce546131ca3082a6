#pragma once

namespace crfiqa {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace crfiqa
