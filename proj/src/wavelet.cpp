#include "wsr/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wsr/error.hpp"

namespace wsr {

WaveletFilterPair WaveletFilterPair::haar() {
  const double r = 1.0 / std::sqrt(2.0);
  return {{r, r}, {r, -r}};
}

Dwt1d dwt1d(std::span<const double> signal, const WaveletFilterPair& f) {
  if (signal.size() % 2 != 0) {
    throw DimensionError("dwt1d: signal length " + std::to_string(signal.size()) + " is odd");
  }
  const std::size_t half = signal.size() / 2;
  Dwt1d out{std::vector<double>(half), std::vector<double>(half)};
  for (std::size_t i = 0; i < half; ++i) {
    const double x0 = signal[2 * i];
    const double x1 = signal[2 * i + 1];
    out.approx[i] = x0 * f.low[0] + x1 * f.low[1];
    out.detail[i] = x0 * f.high[0] + x1 * f.high[1];
  }
  return out;
}

std::vector<double> idwt1d(std::span<const double> approx, std::span<const double> detail,
                           const WaveletFilterPair& f) {
  if (approx.size() != detail.size()) {
    throw DimensionError("idwt1d: approx length " + std::to_string(approx.size()) + " != detail length " +
                         std::to_string(detail.size()));
  }
  std::vector<double> x(2 * approx.size());
  for (std::size_t i = 0; i < approx.size(); ++i) {
    x[2 * i] = approx[i] * f.low[0] + detail[i] * f.high[0];
    x[2 * i + 1] = approx[i] * f.low[1] + detail[i] * f.high[1];
  }
  return x;
}

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

// Haar analysis of one 2D plane into out[0..3] = LL, LH, HL, HH. `src` has
// extent h x w with row stride w; each output has extent h/2 x w/2.
void haar2d(const double* src, std::size_t h, std::size_t w, double* const out[4]) {
  const std::size_t hw = w / 2;
  std::vector<double> lo(h * hw), hi(h * hw);
  for (std::size_t y = 0; y < h; ++y) {
    const double* row = src + y * w;
    for (std::size_t x = 0; x < hw; ++x) {
      lo[y * hw + x] = (row[2 * x] + row[2 * x + 1]) * kInvSqrt2;
      hi[y * hw + x] = (row[2 * x] - row[2 * x + 1]) * kInvSqrt2;
    }
  }
  for (std::size_t y = 0; y < h / 2; ++y) {
    const double* l0 = &lo[2 * y * hw];
    const double* l1 = l0 + hw;
    const double* h0 = &hi[2 * y * hw];
    const double* h1 = h0 + hw;
    for (std::size_t x = 0; x < hw; ++x) {
      out[0][y * hw + x] = (l0[x] + l1[x]) * kInvSqrt2;
      out[1][y * hw + x] = (h0[x] + h1[x]) * kInvSqrt2;
      out[2][y * hw + x] = (l0[x] - l1[x]) * kInvSqrt2;
      out[3][y * hw + x] = (h0[x] - h1[x]) * kInvSqrt2;
    }
  }
}

// Inverse of haar2d. Each band has extent bh x bw; dst has 2bh x 2bw.
void ihaar2d(const double* const in[4], std::size_t bh, std::size_t bw, double* dst) {
  const std::size_t w = 2 * bw;
  std::vector<double> lo(2 * bh * bw), hi(2 * bh * bw);
  for (std::size_t y = 0; y < bh; ++y) {
    for (std::size_t x = 0; x < bw; ++x) {
      const std::size_t i = y * bw + x;
      lo[2 * y * bw + x] = (in[0][i] + in[2][i]) * kInvSqrt2;
      lo[(2 * y + 1) * bw + x] = (in[0][i] - in[2][i]) * kInvSqrt2;
      hi[2 * y * bw + x] = (in[1][i] + in[3][i]) * kInvSqrt2;
      hi[(2 * y + 1) * bw + x] = (in[1][i] - in[3][i]) * kInvSqrt2;
    }
  }
  for (std::size_t y = 0; y < 2 * bh; ++y) {
    for (std::size_t x = 0; x < bw; ++x) {
      const double l = lo[y * bw + x];
      const double hv = hi[y * bw + x];
      dst[y * w + 2 * x] = (l + hv) * kInvSqrt2;
      dst[y * w + 2 * x + 1] = (l - hv) * kInvSqrt2;
    }
  }
}

}  // namespace

Dwt2d dwt2d(const Plane& image) {
  if (image.h % 2 != 0 || image.w % 2 != 0) {
    throw DimensionError("dwt2d: extent " + std::to_string(image.h) + "x" + std::to_string(image.w) +
                         " is not even");
  }
  Dwt2d b{Plane(image.h / 2, image.w / 2), Plane(image.h / 2, image.w / 2), Plane(image.h / 2, image.w / 2),
          Plane(image.h / 2, image.w / 2)};
  double* const out[4] = {b.ll.v.data(), b.lh.v.data(), b.hl.v.data(), b.hh.v.data()};
  haar2d(image.v.data(), image.h, image.w, out);
  return b;
}

Plane idwt2d(const Dwt2d& b) {
  const std::size_t bh = b.ll.h, bw = b.ll.w;
  for (const Plane* p : {&b.lh, &b.hl, &b.hh}) {
    if (p->h != bh || p->w != bw) throw DimensionError("idwt2d: bands have differing extents");
  }
  Plane out(2 * bh, 2 * bw);
  const double* const in[4] = {b.ll.v.data(), b.lh.v.data(), b.hl.v.data(), b.hh.v.data()};
  ihaar2d(in, bh, bw, out.v.data());
  return out;
}

SubbandSet::SubbandSet(Tensor coeffs) : coeffs_(std::move(coeffs)) {
  const Shape& s = coeffs_.shape();
  if (s.c == 0 || s.c % kBandsPerChannel != 0) {
    throw DimensionError("SubbandSet: channel count " + std::to_string(s.c) + " is not a positive multiple of 16");
  }
  if (s.h == 0 || s.w == 0) throw DimensionError("SubbandSet: empty band extent " + to_string(s));
}

SubbandSet wpt2(const Tensor& image) {
  const Shape& s = image.shape();
  if (s.h % 4 != 0) throw DimensionError("wpt2: height " + std::to_string(s.h) + " is not divisible by 4");
  if (s.w % 4 != 0) throw DimensionError("wpt2: width " + std::to_string(s.w) + " is not divisible by 4");
  if (s.h == 0 || s.w == 0) throw DimensionError("wpt2: empty image " + to_string(s));

  const std::size_t h1 = s.h / 2, w1 = s.w / 2;
  Tensor coeffs({s.n, s.c * kBandsPerChannel, s.h / 4, s.w / 4});
  std::vector<double> level1(4 * h1 * w1);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      double* const l1[4] = {&level1[0], &level1[h1 * w1], &level1[2 * h1 * w1], &level1[3 * h1 * w1]};
      haar2d(image.plane(n, c), s.h, s.w, l1);
      for (std::size_t p = 0; p < 4; ++p) {
        double* const l2[4] = {coeffs.plane(n, c * 16 + 4 * p), coeffs.plane(n, c * 16 + 4 * p + 1),
                               coeffs.plane(n, c * 16 + 4 * p + 2), coeffs.plane(n, c * 16 + 4 * p + 3)};
        haar2d(l1[p], h1, w1, l2);
      }
    }
  }
  return SubbandSet(std::move(coeffs));
}

Tensor iwpt2(const SubbandSet& subbands) {
  const Tensor& coeffs = subbands.coeffs();
  const Shape& s = coeffs.shape();
  if (s.c == 0 || s.c % kBandsPerChannel != 0) {
    throw DimensionError("iwpt2: channel count " + std::to_string(s.c) + " is not a multiple of 16");
  }
  const std::size_t colors = s.c / kBandsPerChannel;
  const std::size_t h1 = 2 * s.h, w1 = 2 * s.w;
  Tensor image({s.n, colors, 4 * s.h, 4 * s.w});
  std::vector<double> level1(4 * h1 * w1);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < colors; ++c) {
      for (std::size_t p = 0; p < 4; ++p) {
        const double* const l2[4] = {coeffs.plane(n, c * 16 + 4 * p), coeffs.plane(n, c * 16 + 4 * p + 1),
                                     coeffs.plane(n, c * 16 + 4 * p + 2), coeffs.plane(n, c * 16 + 4 * p + 3)};
        ihaar2d(l2, s.h, s.w, &level1[p * h1 * w1]);
      }
      const double* const l1[4] = {&level1[0], &level1[h1 * w1], &level1[2 * h1 * w1], &level1[3 * h1 * w1]};
      ihaar2d(l1, h1, w1, image.plane(n, c));
    }
  }
  return image;
}

Tensor iwpt2_backward(const Tensor& grad_image) { return std::move(wpt2(grad_image)).release(); }

Plane tile_bands(const SubbandSet& subbands, std::size_t n, std::size_t color) {
  const std::size_t bh = subbands.band_h(), bw = subbands.band_w();
  Plane out(4 * bh, 4 * bw);
  for (std::size_t b = 0; b < kBandsPerChannel; ++b) {
    const double* src = subbands.band(n, color, b);
    const auto [mn, mx] = std::minmax_element(src, src + bh * bw);
    const double lo = *mn, range = *mx - *mn;
    const std::size_t oy = (b / 4) * bh, ox = (b % 4) * bw;
    for (std::size_t y = 0; y < bh; ++y) {
      for (std::size_t x = 0; x < bw; ++x) {
        out(oy + y, ox + x) = range > 0.0 ? (src[y * bw + x] - lo) / range : 0.5;
      }
    }
  }
  return out;
}

}  // namespace wsr
