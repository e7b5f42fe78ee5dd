#pragma once

namespace phasescope {
inline constexpr const char* kToolVersion = "0.1.0";
}
