#include "wsr/resize.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "wsr/error.hpp"

namespace wsr {

double keys_cubic(double x) {
  const double a = kKeysA;
  const double t = std::abs(x);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace {

// Sparse resampling matrix for one axis: out[i] = sum_k weight[i][k] * in[index[i][k]].
struct AxisWeights {
  std::vector<std::vector<std::size_t>> index;
  std::vector<std::vector<double>> weight;
};

AxisWeights axis_weights(std::size_t in, std::size_t out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  // Shrinking widens the kernel by `scale`; enlarging keeps its natural width.
  const double stretch = std::max(scale, 1.0);
  const double support = 2.0 * stretch;
  AxisWeights aw;
  aw.index.resize(out);
  aw.weight.resize(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double center = (static_cast<double>(i) + 0.5) * scale - 0.5;
    const long first = static_cast<long>(std::ceil(center - support));
    const long last = static_cast<long>(std::floor(center + support));
    double total = 0.0;
    for (long j = first; j <= last; ++j) {
      const double wgt = keys_cubic((center - static_cast<double>(j)) / stretch);
      if (wgt == 0.0) continue;
      const long clamped = std::clamp(j, 0L, static_cast<long>(in) - 1);
      aw.index[i].push_back(static_cast<std::size_t>(clamped));
      aw.weight[i].push_back(wgt);
      total += wgt;
    }
    for (double& wgt : aw.weight[i]) wgt /= total;
  }
  return aw;
}

}  // namespace

Tensor bicubic_resize(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  const Shape& s = image.shape();
  if (out_h == 0 || out_w == 0) {
    throw DimensionError("bicubic_resize: target extent " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                         " has a zero side");
  }
  if (s.h == 0 || s.w == 0) throw DimensionError("bicubic_resize: empty input " + to_string(s));
  const AxisWeights rows = axis_weights(s.h, out_h);
  const AxisWeights cols = axis_weights(s.w, out_w);

  Tensor out({s.n, s.c, out_h, out_w});
  std::vector<double> tmp(s.h * out_w);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* src = image.plane(n, c);
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < out_w; ++x) {
          double acc = 0.0;
          for (std::size_t k = 0; k < cols.index[x].size(); ++k) acc += cols.weight[x][k] * src[y * s.w + cols.index[x][k]];
          tmp[y * out_w + x] = acc;
        }
      }
      double* dst = out.plane(n, c);
      for (std::size_t y = 0; y < out_h; ++y) {
        for (std::size_t x = 0; x < out_w; ++x) {
          double acc = 0.0;
          for (std::size_t k = 0; k < rows.index[y].size(); ++k) acc += rows.weight[y][k] * tmp[rows.index[y][k] * out_w + x];
          dst[y * out_w + x] = acc;
        }
      }
    }
  }
  check_finite(out, "bicubic_resize");
  return out;
}

}  // namespace wsr
