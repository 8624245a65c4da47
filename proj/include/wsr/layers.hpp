#pragma once

#include <vector>

#include "wsr/tensor.hpp"

namespace wsr {

// Parametric ReLU with one learned negative-side slope per channel.
// `slope` is a length-C vector tensor.
Tensor prelu(const Tensor& x, const Tensor& slope);

struct PreluGrads {
  Tensor x;
  Tensor slope;
};
PreluGrads prelu_backward(const Tensor& x, const Tensor& slope, const Tensor& grad);

Tensor leaky_relu(const Tensor& x, double negative_slope);
Tensor leaky_relu_backward(const Tensor& x, double negative_slope, const Tensor& grad);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad);

// [n, c, h, w] -> [n, c, 1, 1]
Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& grad);

double sigmoid(double z);

// Nearest-neighbour upsampling by an integer factor.
Tensor upsample_nearest(const Tensor& x, std::size_t factor);

}  // namespace wsr
