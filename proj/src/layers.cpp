#include "wsr/layers.hpp"

#include <cmath>
#include <string>

#include "wsr/error.hpp"

namespace wsr {

namespace {

void check_slope(const Tensor& x, const Tensor& slope) {
  if (slope.numel() != x.shape().c) {
    throw DimensionError("prelu: slope length " + std::to_string(slope.numel()) + " does not match " +
                         std::to_string(x.shape().c) + " channels of " + to_string(x.shape()));
  }
}

}  // namespace

Tensor prelu(const Tensor& x, const Tensor& slope) {
  check_slope(x, slope);
  const Shape& s = x.shape();
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double a = slope[c];
      const double* src = x.plane(n, c);
      double* dst = out.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) dst[i] = src[i] >= 0.0 ? src[i] : a * src[i];
    }
  }
  check_finite(out, "prelu");
  return out;
}

PreluGrads prelu_backward(const Tensor& x, const Tensor& slope, const Tensor& grad) {
  check_slope(x, slope);
  require_same_shape(x, grad, "prelu_backward");
  const Shape& s = x.shape();
  PreluGrads g{Tensor(s), Tensor(slope.shape())};
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double a = slope[c];
      const double* src = x.plane(n, c);
      const double* go = grad.plane(n, c);
      double* gx = g.x.plane(n, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) {
        if (src[i] >= 0.0) {
          gx[i] = go[i];
        } else {
          gx[i] = a * go[i];
          acc += src[i] * go[i];
        }
      }
      g.slope[c] += acc;
    }
  }
  return g;
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] >= 0.0 ? x[i] : negative_slope * x[i];
  return out;
}

Tensor leaky_relu_backward(const Tensor& x, double negative_slope, const Tensor& grad) {
  require_same_shape(x, grad, "leaky_relu_backward");
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) g[i] = x[i] >= 0.0 ? grad[i] : negative_slope * grad[i];
  return g;
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor relu_backward(const Tensor& x, const Tensor& grad) { return leaky_relu_backward(x, 0.0, grad); }

Tensor global_avg_pool(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.plane() == 0) throw DimensionError("global_avg_pool: empty spatial extent " + to_string(s));
  Tensor out({s.n, s.c, 1, 1});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* p = x.plane(n, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
      out.at(n, c, 0, 0) = acc / static_cast<double>(s.plane());
    }
  }
  return out;
}

Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& grad) {
  if (grad.shape() != Shape{input_shape.n, input_shape.c, 1, 1}) {
    throw DimensionError("global_avg_pool_backward: grad " + to_string(grad.shape()) + " does not match input " +
                         to_string(input_shape));
  }
  Tensor g(input_shape);
  const double inv = 1.0 / static_cast<double>(input_shape.plane());
  for (std::size_t n = 0; n < input_shape.n; ++n) {
    for (std::size_t c = 0; c < input_shape.c; ++c) {
      const double v = grad.at(n, c, 0, 0) * inv;
      double* p = g.plane(n, c);
      for (std::size_t i = 0; i < input_shape.plane(); ++i) p[i] = v;
    }
  }
  return g;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  if (factor == 0) throw ConfigError("upsample_nearest: factor must be positive");
  const Shape& s = x.shape();
  Tensor out({s.n, s.c, s.h * factor, s.w * factor});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < s.h * factor; ++y) {
        for (std::size_t xx = 0; xx < s.w * factor; ++xx) out.at(n, c, y, xx) = x.at(n, c, y / factor, xx / factor);
      }
    }
  }
  return out;
}

}  // namespace wsr
