#pragma once

namespace bbmvote {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bbmvote
