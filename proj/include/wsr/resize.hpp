#pragma once

#include <cstddef>

#include "wsr/tensor.hpp"

namespace wsr {

inline constexpr double kKeysA = -0.5;

// Keys cubic convolution kernel with a = -0.5.
double keys_cubic(double x);

// Separable bicubic resampling with half-pixel centers
// (src = (dst + 0.5) * in/out - 0.5) and clamped edges. When shrinking,
// the kernel is widened by the scale factor so it also low-pass filters.
Tensor bicubic_resize(const Tensor& image, std::size_t out_h, std::size_t out_w);

}  // namespace wsr
