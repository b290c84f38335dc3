#pragma once

namespace cvxsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cvxsim
