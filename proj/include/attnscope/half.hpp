#pragma once

#include <cstdint>

namespace attnscope {

// IEEE 754 binary16 conversions. GCC 11 has no std::float16_t, so the
// storage codec works on raw bit patterns.

/// Round-to-nearest-even float -> half. NaN stays NaN, overflow goes to inf.
std::uint16_t float_to_half(float value) noexcept;

/// Exact half -> float (every half is representable as a float).
float half_to_float(std::uint16_t bits) noexcept;

}  // namespace attnscope
