#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wsr/plane.hpp"
#include "wsr/tensor.hpp"

namespace wsr {

inline constexpr double kPsnrCap = 99.0;
inline constexpr double kLbpEps = 1e-10;

// BT.601 luma of batch item n of an RGB tensor: 0.299 R + 0.587 G + 0.114 B.
Plane to_luma(const Tensor& rgb, std::size_t n = 0);
Plane channel_plane(const Tensor& t, std::size_t n, std::size_t c);
Plane crop_border(const Plane& p, std::size_t border);

// 10 log10(range^2 / MSE), capped at 99 dB when MSE is zero.
double psnr(const Plane& a, const Plane& b, double data_range = 1.0);
double psnr(std::span<const double> a, std::span<const double> b, double data_range = 1.0);

// Mean SSIM over valid positions of an 11x11 Gaussian window (sigma 1.5),
// C1 = (0.01 L)^2, C2 = (0.03 L)^2.
double ssim(const Plane& a, const Plane& b, double data_range = 1.0);

// Luminance FSIM: phase congruency (log-Gabor, 4 scales x 4 orientations)
// and Scharr gradient-magnitude similarity, pooled by max phase congruency.
// Inputs are on a [0, 1] scale and are rescaled to [0, 255] internally.
double fsim(const Plane& a, const Plane& b);
// Phase congruency map of a [0, 255] image (exposed for tests and tools).
Plane phase_congruency(const Plane& image);

// Universal image quality index on 8x8 sliding windows (stride 1).
double uiq(const Plane& a, const Plane& b);
// Q for a single window covering the whole of both planes.
double uiq_window(const Plane& a, const Plane& b);

using LbpHistogram = std::array<std::uint64_t, 256>;

// 8-neighbour radius-1 codes over interior pixels. Neighbours run clockwise
// from the top-left; bit k is set when neighbour k >= center.
LbpHistogram lbp_histogram(const Plane& image);
// Chi-square distance between the two histograms after normalizing each to
// unit sum: sum (p - q)^2 / (p + q + eps).
double lbp_distance(std::span<const std::uint64_t> h1, std::span<const std::uint64_t> h2);

enum class ColorMode { y, rgb };

struct MetricConfig {
  ColorMode mode = ColorMode::y;
  std::size_t border = 4;  // applied in y mode only
  double data_range = 1.0;
};

struct MetricRow {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  double fsim = 0.0;
  double uiq = 0.0;
  double lbp_chi2 = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> per_image;
  MetricRow aggregate;
  MetricConfig config;
};

// sr, hr: [1, 3, H, W] tensors with values on [0, data_range].
MetricRow evaluate_pair(const Tensor& sr, const Tensor& hr, const MetricConfig& config, std::string id = {});
MetricReport make_report(std::vector<MetricRow> rows, const MetricConfig& config);
// Pairs files by name; every SR image needs an HR counterpart.
MetricReport evaluate_dataset(const std::filesystem::path& sr_dir, const std::filesystem::path& hr_dir,
                              const MetricConfig& config);

void write_csv(std::ostream& os, const MetricReport& report);
void print_table(std::ostream& os, const MetricReport& report);

}  // namespace wsr
