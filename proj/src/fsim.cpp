#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "wsr/error.hpp"
#include "wsr/metrics.hpp"

namespace wsr {

namespace {

constexpr int kScales = 4;
constexpr int kOrients = 4;
constexpr double kMinWavelength = 6.0;
constexpr double kMult = 2.0;
constexpr double kSigmaOnf = 0.55;
constexpr double kDThetaOnSigma = 1.2;
constexpr double kNoiseK = 2.0;
constexpr double kEpsilon = 1e-4;
constexpr double kT1 = 0.85;
constexpr double kT2 = 160.0;

using cplx = std::complex<double>;

// In-place 2D DFT; `inverse` applies the 1/(rows*cols) normalization.
void dft2(std::vector<cplx>& data, std::size_t rows, std::size_t cols, bool inverse) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), p, p,
                                    inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  if (inverse) {
    const double k = 1.0 / static_cast<double>(rows * cols);
    for (cplx& v : data) v *= k;
  }
}

// Normalized frequency coordinate of DFT index i (range about +-0.5), with
// zero frequency at index 0.
std::vector<double> freq_axis(std::size_t n) {
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (n % 2 == 1) {
      centered[i] = (static_cast<double>(i) - static_cast<double>(n - 1) / 2.0) / static_cast<double>(n - 1);
    } else {
      centered[i] = (static_cast<double>(i) - static_cast<double>(n) / 2.0) / static_cast<double>(n);
    }
  }
  // ifftshift
  std::vector<double> shifted(n);
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < n; ++i) shifted[i] = centered[(i + half) % n];
  return shifted;
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2));
  return (lo + hi) / 2.0;
}

// 2D convolution with zero padding, output the same size as the input
// (central part of the full convolution).
Plane conv_same(const Plane& in, const std::vector<double>& k, std::size_t kh, std::size_t kw) {
  Plane out(in.h, in.w);
  const long oy = static_cast<long>(kh / 2), ox = static_cast<long>(kw / 2);
  for (std::size_t y = 0; y < in.h; ++y) {
    for (std::size_t x = 0; x < in.w; ++x) {
      double acc = 0.0;
      for (std::size_t u = 0; u < kh; ++u) {
        const long sy = static_cast<long>(y) + oy - static_cast<long>(u);
        if (sy < 0 || sy >= static_cast<long>(in.h)) continue;
        for (std::size_t v = 0; v < kw; ++v) {
          const long sx = static_cast<long>(x) + ox - static_cast<long>(v);
          if (sx < 0 || sx >= static_cast<long>(in.w)) continue;
          acc += k[u * kw + v] * in(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
        }
      }
      out(y, x) = acc;
    }
  }
  return out;
}

Plane downsample(const Plane& in) {
  const std::size_t f =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(std::min(in.h, in.w)) / 256.0)));
  if (f == 1) return in;
  const std::vector<double> box(f * f, 1.0 / static_cast<double>(f * f));
  const Plane smooth = conv_same(in, box, f, f);
  Plane out((in.h + f - 1) / f, (in.w + f - 1) / f);
  for (std::size_t y = 0; y < out.h; ++y) {
    for (std::size_t x = 0; x < out.w; ++x) out(y, x) = smooth(y * f, x * f);
  }
  return out;
}

Plane gradient_magnitude(const Plane& img) {
  const std::vector<double> dx = {3 / 16.0, 0, -3 / 16.0, 10 / 16.0, 0, -10 / 16.0, 3 / 16.0, 0, -3 / 16.0};
  const std::vector<double> dy = {3 / 16.0, 10 / 16.0, 3 / 16.0, 0, 0, 0, -3 / 16.0, -10 / 16.0, -3 / 16.0};
  const Plane gx = conv_same(img, dx, 3, 3);
  const Plane gy = conv_same(img, dy, 3, 3);
  Plane g(img.h, img.w);
  for (std::size_t i = 0; i < g.size(); ++i) g.v[i] = std::sqrt(gx.v[i] * gx.v[i] + gy.v[i] * gy.v[i]);
  return g;
}

}  // namespace

Plane phase_congruency(const Plane& im) {
  const std::size_t rows = im.h, cols = im.w, n = rows * cols;
  const double theta_sigma = std::numbers::pi / kOrients / kDThetaOnSigma;

  std::vector<cplx> image_fft(n);
  for (std::size_t i = 0; i < n; ++i) image_fft[i] = im.v[i];
  dft2(image_fft, rows, cols, false);

  const auto fx = freq_axis(cols);
  const auto fy = freq_axis(rows);
  std::vector<double> radius(n), sin_t(n), cos_t(n), lowpass(n);
  for (std::size_t y = 0; y < rows; ++y) {
    for (std::size_t x = 0; x < cols; ++x) {
      const std::size_t i = y * cols + x;
      const double r = std::sqrt(fx[x] * fx[x] + fy[y] * fy[y]);
      const double theta = std::atan2(-fy[y], fx[x]);
      radius[i] = r;
      sin_t[i] = std::sin(theta);
      cos_t[i] = std::cos(theta);
      lowpass[i] = 1.0 / (1.0 + std::pow(r / 0.45, 2 * 15));
    }
  }
  radius[0] = 1.0;

  std::vector<std::vector<double>> log_gabor(kScales, std::vector<double>(n));
  const double log_sigma = std::log(kSigmaOnf);
  for (int s = 0; s < kScales; ++s) {
    const double fo = 1.0 / (kMinWavelength * std::pow(kMult, s));
    for (std::size_t i = 0; i < n; ++i) {
      const double l = std::log(radius[i] / fo);
      log_gabor[s][i] = std::exp(-(l * l) / (2.0 * log_sigma * log_sigma)) * lowpass[i];
    }
    log_gabor[s][0] = 0.0;
  }

  std::vector<double> energy_all(n, 0.0), an_all(n, 0.0);
  std::vector<std::vector<cplx>> eo(kScales, std::vector<cplx>(n));
  std::vector<std::vector<double>> ifft_filter(kScales, std::vector<double>(n));
  std::vector<double> filter(n);

  for (int o = 0; o < kOrients; ++o) {
    const double angle = o * std::numbers::pi / kOrients;
    const double ca = std::cos(angle), sa = std::sin(angle);
    std::vector<double> spread(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double ds = sin_t[i] * ca - cos_t[i] * sa;
      const double dc = cos_t[i] * ca + sin_t[i] * sa;
      const double dtheta = std::abs(std::atan2(ds, dc));
      spread[i] = std::exp(-(dtheta * dtheta) / (2.0 * theta_sigma * theta_sigma));
    }

    std::vector<double> sum_e(n, 0.0), sum_o(n, 0.0), sum_an(n, 0.0), energy(n, 0.0);
    double em_n = 0.0;
    for (int s = 0; s < kScales; ++s) {
      for (std::size_t i = 0; i < n; ++i) filter[i] = log_gabor[s][i] * spread[i];
      std::vector<cplx> f(filter.begin(), filter.end());
      dft2(f, rows, cols, true);
      const double rescale = std::sqrt(static_cast<double>(n));
      for (std::size_t i = 0; i < n; ++i) ifft_filter[s][i] = f[i].real() * rescale;

      auto& resp = eo[s];
      for (std::size_t i = 0; i < n; ++i) resp[i] = image_fft[i] * filter[i];
      dft2(resp, rows, cols, true);
      for (std::size_t i = 0; i < n; ++i) {
        sum_an[i] += std::abs(resp[i]);
        sum_e[i] += resp[i].real();
        sum_o[i] += resp[i].imag();
      }
      if (s == 0) {
        for (std::size_t i = 0; i < n; ++i) em_n += filter[i] * filter[i];
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      const double x_energy = std::sqrt(sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]) + kEpsilon;
      const double mean_e = sum_e[i] / x_energy;
      const double mean_o = sum_o[i] / x_energy;
      for (int s = 0; s < kScales; ++s) {
        const double e = eo[s][i].real(), od = eo[s][i].imag();
        energy[i] += e * mean_e + od * mean_o - std::abs(e * mean_o - od * mean_e);
      }
    }

    // Noise threshold from the smallest-scale response.
    std::vector<double> e2(n);
    for (std::size_t i = 0; i < n; ++i) e2[i] = std::norm(eo[0][i]);
    const double mean_e2n = -median(std::move(e2)) / std::log(0.5);
    const double noise_power = em_n > 0.0 ? mean_e2n / em_n : 0.0;

    double sum_an2 = 0.0, sum_aiaj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int s = 0; s < kScales; ++s) sum_an2 += ifft_filter[s][i] * ifft_filter[s][i];
      for (int si = 0; si < kScales - 1; ++si) {
        for (int sj = si + 1; sj < kScales; ++sj) sum_aiaj += ifft_filter[si][i] * ifft_filter[sj][i];
      }
    }
    const double est_noise_energy2 = 2.0 * noise_power * sum_an2 + 4.0 * noise_power * sum_aiaj;
    const double tau = std::sqrt(std::max(est_noise_energy2, 0.0) / 2.0);
    const double est_noise_energy = tau * std::sqrt(std::numbers::pi / 2.0);
    const double est_noise_sigma = std::sqrt((2.0 - std::numbers::pi / 2.0) * tau * tau);
    const double threshold = (est_noise_energy + kNoiseK * est_noise_sigma) / 1.7;

    for (std::size_t i = 0; i < n; ++i) {
      energy_all[i] += std::max(energy[i] - threshold, 0.0);
      an_all[i] += sum_an[i];
    }
  }

  Plane pc(rows, cols);
  for (std::size_t i = 0; i < n; ++i) pc.v[i] = an_all[i] > 0.0 ? energy_all[i] / an_all[i] : 0.0;
  return pc;
}

double fsim(const Plane& a, const Plane& b) {
  if (a.h != b.h || a.w != b.w) {
    throw DimensionError("fsim: extent mismatch " + std::to_string(a.h) + "x" + std::to_string(a.w) + " vs " +
                         std::to_string(b.h) + "x" + std::to_string(b.w));
  }
  if (a.h < 32 || a.w < 32) {
    throw DimensionError("fsim: image " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                         " is smaller than 32x32");
  }
  Plane ya(a.h, a.w), yb(b.h, b.w);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ya.v[i] = a.v[i] * 255.0;
    yb.v[i] = b.v[i] * 255.0;
  }
  ya = downsample(ya);
  yb = downsample(yb);

  const Plane pc_a = phase_congruency(ya);
  const Plane pc_b = phase_congruency(yb);
  const Plane g_a = gradient_magnitude(ya);
  const Plane g_b = gradient_magnitude(yb);

  double num = 0.0, den = 0.0, unweighted = 0.0;
  for (std::size_t i = 0; i < pc_a.size(); ++i) {
    const double p1 = pc_a.v[i], p2 = pc_b.v[i];
    const double g1 = g_a.v[i], g2 = g_b.v[i];
    const double pc_sim = (2.0 * p1 * p2 + kT1) / (p1 * p1 + p2 * p2 + kT1);
    const double g_sim = (2.0 * g1 * g2 + kT2) / (g1 * g1 + g2 * g2 + kT2);
    const double pcm = std::max(p1, p2);
    num += g_sim * pc_sim * pcm;
    den += pcm;
    unweighted += g_sim * pc_sim;
  }
  // No phase congruency anywhere (flat images): fall back to the unweighted mean.
  if (den == 0.0) return unweighted / static_cast<double>(pc_a.size());
  return num / den;
}

}  // namespace wsr
