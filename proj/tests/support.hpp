#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "wsr/tensor.hpp"

namespace wsr::test {

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Values bounded away from zero, so finite differences never straddle a
// rectifier kink.
inline Tensor random_signed_away_from_zero(Shape s, std::mt19937_64& rng, double gap = 0.05) {
  std::uniform_real_distribution<double> u(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(s);
  for (auto& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

struct GradCheckResult {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a rectifier kink
};

// Sign pattern of every rectifier input; a change between x+eps and x-eps
// means the central difference straddles a kink and is not a derivative.
using KinkSignature = std::function<std::vector<bool>()>;

// Relative error against a floor, so tiny gradients compare absolutely.
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central differences of `loss` wrt every entry of `x` (or a strided subset
// when `max_entries` is smaller than numel), compared to `analytic`.
inline GradCheckResult grad_check(Tensor& x, const Tensor& analytic, const std::function<double()>& loss,
                                  double eps = 1e-5, std::size_t max_entries = 0, double floor = 1e-6,
                                  const KinkSignature& kinks = {}) {
  GradCheckResult r;
  const std::size_t n = x.numel();
  const std::size_t step = (max_entries == 0 || n <= max_entries) ? 1 : (n + max_entries - 1) / max_entries;
  for (std::size_t i = 0; i < n; i += step) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = loss();
    const auto sig_up = kinks ? kinks() : std::vector<bool>{};
    x[i] = keep - eps;
    const double down = loss();
    const auto sig_down = kinks ? kinks() : std::vector<bool>{};
    x[i] = keep;
    if (sig_up != sig_down) {
      ++r.skipped;
      continue;
    }
    const double numeric = (up - down) / (2 * eps);
    r.max_rel = std::max(r.max_rel, rel_err(analytic[i], numeric, floor));
    ++r.checked;
  }
  return r;
}

// Weighted sum with fixed random weights: turns a tensor-valued function into
// a scalar whose gradient wrt the output is exactly `w`.
inline double dot(const Tensor& a, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * w[i];
  return s;
}

// Smooth color test image on [0,1] with a few edges: a radial blob, a
// diagonal ramp, and a hard-edged square.
inline Tensor test_image(std::size_t h, std::size_t w, std::uint64_t variant = 0) {
  Tensor t({1, 3, h, w});
  const double ph = 0.7 * static_cast<double>(variant);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double fy = (y + 0.5) / h;
      const double fx = (x + 0.5) / w;
      const double blob = std::exp(-((fx - 0.4) * (fx - 0.4) + (fy - 0.6) * (fy - 0.6)) / 0.05);
      const bool square = fx > 0.55 && fx < 0.85 && fy > 0.15 && fy < 0.45;
      const double wave = 0.5 + 0.5 * std::sin(9.0 * fx + 5.0 * fy + ph);
      t.at(0, 0, y, x) = std::clamp(0.15 + 0.6 * blob + (square ? 0.25 : 0.0), 0.0, 1.0);
      t.at(0, 1, y, x) = std::clamp(0.2 + 0.5 * wave * (1.0 - fy) + (square ? 0.3 : 0.0), 0.0, 1.0);
      t.at(0, 2, y, x) = std::clamp(0.1 + 0.7 * fx * fy + 0.2 * blob, 0.0, 1.0);
    }
  }
  return t;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("wsr_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace wsr::test
