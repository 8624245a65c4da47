#pragma once

#include <cstddef>
#include <vector>

namespace wsr {

// Single-channel 2D array of doubles, row-major.
struct Plane {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(std::size_t rows, std::size_t cols, double fill = 0.0) : h(rows), w(cols), v(rows * cols, fill) {}

  double& operator()(std::size_t y, std::size_t x) { return v[y * w + x]; }
  double operator()(std::size_t y, std::size_t x) const { return v[y * w + x]; }
  std::size_t size() const { return v.size(); }
};

}  // namespace wsr
