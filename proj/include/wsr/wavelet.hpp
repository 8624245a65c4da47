#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "wsr/plane.hpp"
#include "wsr/tensor.hpp"

namespace wsr {

// Analysis filter pair l[k], h[k]. Only length-2 orthonormal pairs are
// supported; synthesis uses the transposed (time-reversed) pair.
struct WaveletFilterPair {
  std::array<double, 2> low;
  std::array<double, 2> high;

  static WaveletFilterPair haar();
};

struct Dwt1d {
  std::vector<double> approx;
  std::vector<double> detail;
};

// a[n] = x[2n] l[0] + x[2n+1] l[1], d[n] = x[2n] h[0] + x[2n+1] h[1].
Dwt1d dwt1d(std::span<const double> signal, const WaveletFilterPair& f = WaveletFilterPair::haar());
std::vector<double> idwt1d(std::span<const double> approx, std::span<const double> detail,
                           const WaveletFilterPair& f = WaveletFilterPair::haar());

// One separable analysis level. First letter names the vertical filter,
// second the horizontal one: lh is low-pass down columns and high-pass
// along rows.
struct Dwt2d {
  Plane ll;
  Plane lh;
  Plane hl;
  Plane hh;
};

Dwt2d dwt2d(const Plane& image);
Plane idwt2d(const Dwt2d& bands);

inline constexpr std::size_t kBandsPerChannel = 16;

// Two-level Haar wavelet packet coefficients of a [n, C, H, W] image.
//
// Stored as a [n, 16*C, H/4, W/4] tensor: channel 16*color + band, where
// band = 4*p + q, p is the first-level band (0 LL, 1 LH, 2 HL, 3 HH) and q
// the second-level band obtained by decomposing band p again.
class SubbandSet {
 public:
  SubbandSet() = default;
  // Wraps existing coefficients; channel count must be a multiple of 16.
  explicit SubbandSet(Tensor coeffs);

  const Tensor& coeffs() const { return coeffs_; }
  Tensor& coeffs() { return coeffs_; }
  Tensor release() && { return std::move(coeffs_); }

  std::size_t batch() const { return coeffs_.shape().n; }
  std::size_t colors() const { return coeffs_.shape().c / kBandsPerChannel; }
  std::size_t band_h() const { return coeffs_.shape().h; }
  std::size_t band_w() const { return coeffs_.shape().w; }
  std::size_t source_h() const { return 4 * band_h(); }
  std::size_t source_w() const { return 4 * band_w(); }

  const double* band(std::size_t n, std::size_t color, std::size_t b) const {
    return coeffs_.plane(n, color * kBandsPerChannel + b);
  }
  double* band(std::size_t n, std::size_t color, std::size_t b) {
    return coeffs_.plane(n, color * kBandsPerChannel + b);
  }

 private:
  Tensor coeffs_;
};

// Both spatial extents must be divisible by 4.
SubbandSet wpt2(const Tensor& image);
Tensor iwpt2(const SubbandSet& subbands);
// Gradient of a scalar loss wrt the coefficients, given its gradient wrt the
// reconstructed image. The inverse is orthonormal, so this is wpt2 itself.
Tensor iwpt2_backward(const Tensor& grad_image);

// Renders one color channel's 16 bands as a 4x4 tile grid (H x W plane),
// each band min-max normalized to [0, 1]; zero-range bands become 0.5.
Plane tile_bands(const SubbandSet& subbands, std::size_t n, std::size_t color);

}  // namespace wsr
