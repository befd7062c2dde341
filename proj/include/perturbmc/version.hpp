#pragma once

namespace perturbmc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace perturbmc
