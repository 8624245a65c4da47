#include "wsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "wsr/dataset.hpp"
#include "wsr/error.hpp"
#include "wsr/image_io.hpp"

namespace wsr {

namespace {

void require_same_extent(const Plane& a, const Plane& b, const char* op) {
  if (a.h != b.h || a.w != b.w) {
    throw DimensionError(std::string(op) + ": extent mismatch " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                         " vs " + std::to_string(b.h) + "x" + std::to_string(b.w));
  }
}

void require_min_extent(const Plane& a, std::size_t min, const char* op) {
  if (a.h < min || a.w < min) {
    throw DimensionError(std::string(op) + ": image " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                         " is smaller than " + std::to_string(min) + "x" + std::to_string(min));
  }
}

}  // namespace

Plane to_luma(const Tensor& rgb, std::size_t n) {
  const Shape& s = rgb.shape();
  if (s.c != 3 || n >= s.n) throw DimensionError("to_luma: need an RGB tensor, got " + to_string(s));
  Plane p(s.h, s.w);
  const double* r = rgb.plane(n, 0);
  const double* g = rgb.plane(n, 1);
  const double* b = rgb.plane(n, 2);
  for (std::size_t i = 0; i < p.size(); ++i) p.v[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return p;
}

Plane channel_plane(const Tensor& t, std::size_t n, std::size_t c) {
  const Shape& s = t.shape();
  Plane p(s.h, s.w);
  std::copy_n(t.plane(n, c), s.plane(), p.v.begin());
  return p;
}

Plane crop_border(const Plane& p, std::size_t border) {
  if (2 * border >= p.h || 2 * border >= p.w) {
    throw DimensionError("crop_border: border " + std::to_string(border) + " consumes the whole image");
  }
  Plane out(p.h - 2 * border, p.w - 2 * border);
  for (std::size_t y = 0; y < out.h; ++y) {
    for (std::size_t x = 0; x < out.w; ++x) out(y, x) = p(y + border, x + border);
  }
  return out;
}

double psnr(std::span<const double> a, std::span<const double> b, double data_range) {
  if (a.size() != b.size() || a.empty()) {
    throw DimensionError("psnr: sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                         " differ or are empty");
  }
  if (!(data_range > 0.0)) throw ConfigError("psnr: data_range must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  const double m = acc / static_cast<double>(a.size());
  if (m == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / m));
}

double psnr(const Plane& a, const Plane& b, double data_range) {
  require_same_extent(a, b, "psnr");
  return psnr(a.v, b.v, data_range);
}

namespace {

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Separable 'valid' filtering with a symmetric 1D kernel.
Plane filter_valid(const Plane& p, const std::vector<double>& k) {
  const std::size_t n = k.size();
  Plane tmp(p.h, p.w - n + 1);
  for (std::size_t y = 0; y < tmp.h; ++y) {
    for (std::size_t x = 0; x < tmp.w; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += k[i] * p(y, x + i);
      tmp(y, x) = acc;
    }
  }
  Plane out(p.h - n + 1, tmp.w);
  for (std::size_t y = 0; y < out.h; ++y) {
    for (std::size_t x = 0; x < out.w; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += k[i] * tmp(y + i, x);
      out(y, x) = acc;
    }
  }
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane out(a.h, a.w);
  for (std::size_t i = 0; i < a.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

}  // namespace

double ssim(const Plane& a, const Plane& b, double data_range) {
  require_same_extent(a, b, "ssim");
  require_min_extent(a, 11, "ssim");
  if (!(data_range > 0.0)) throw ConfigError("ssim: data_range must be positive");
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  const auto win = gaussian_window(11, 1.5);

  const Plane mu_a = filter_valid(a, win);
  const Plane mu_b = filter_valid(b, win);
  const Plane e_aa = filter_valid(product(a, a), win);
  const Plane e_bb = filter_valid(product(b, b), win);
  const Plane e_ab = filter_valid(product(a, b), win);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a.v[i], mb = mu_b.v[i];
    const double va = e_aa.v[i] - ma * ma;
    const double vb = e_bb.v[i] - mb * mb;
    const double cov = e_ab.v[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

namespace {

struct WindowStats {
  double mean_a, mean_b, var_a, var_b, cov;
};

WindowStats window_stats(const Plane& a, const Plane& b, std::size_t y0, std::size_t x0, std::size_t hh,
                         std::size_t ww) {
  const double n = static_cast<double>(hh * ww);
  double sa = 0.0, sb = 0.0;
  for (std::size_t y = y0; y < y0 + hh; ++y) {
    for (std::size_t x = x0; x < x0 + ww; ++x) {
      sa += a(y, x);
      sb += b(y, x);
    }
  }
  WindowStats s{sa / n, sb / n, 0.0, 0.0, 0.0};
  for (std::size_t y = y0; y < y0 + hh; ++y) {
    for (std::size_t x = x0; x < x0 + ww; ++x) {
      const double da = a(y, x) - s.mean_a;
      const double db = b(y, x) - s.mean_b;
      s.var_a += da * da;
      s.var_b += db * db;
      s.cov += da * db;
    }
  }
  s.var_a /= n - 1.0;
  s.var_b /= n - 1.0;
  s.cov /= n - 1.0;
  return s;
}

bool windows_identical(const Plane& a, const Plane& b, std::size_t y0, std::size_t x0, std::size_t hh,
                       std::size_t ww) {
  for (std::size_t y = y0; y < y0 + hh; ++y) {
    for (std::size_t x = x0; x < x0 + ww; ++x) {
      if (a(y, x) != b(y, x)) return false;
    }
  }
  return true;
}

// Q of one window; returns false when the window is skipped.
bool window_q(const Plane& a, const Plane& b, std::size_t y0, std::size_t x0, std::size_t hh, std::size_t ww,
              double& q) {
  const WindowStats s = window_stats(a, b, y0, x0, hh, ww);
  const double var_sum = s.var_a + s.var_b;
  const double mean_sq = s.mean_a * s.mean_a + s.mean_b * s.mean_b;
  if (var_sum != 0.0 && mean_sq != 0.0) {
    q = 4.0 * s.cov * s.mean_a * s.mean_b / (var_sum * mean_sq);
  } else if (var_sum == 0.0 && mean_sq != 0.0) {
    q = 2.0 * s.mean_a * s.mean_b / mean_sq;  // both windows flat: luminance term only
  } else if (var_sum != 0.0) {
    q = 2.0 * s.cov / var_sum;  // both means zero: correlation-contrast term only
  } else {
    if (!windows_identical(a, b, y0, x0, hh, ww)) return false;
    q = 1.0;
  }
  return true;
}

}  // namespace

double uiq(const Plane& a, const Plane& b) {
  require_same_extent(a, b, "uiq");
  require_min_extent(a, 8, "uiq");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + 8 <= a.h; ++y) {
    for (std::size_t x = 0; x + 8 <= a.w; ++x) {
      double q = 0.0;
      if (window_q(a, b, y, x, 8, 8, q)) {
        total += q;
        ++count;
      }
    }
  }
  return count == 0 ? 1.0 : total / static_cast<double>(count);
}

double uiq_window(const Plane& a, const Plane& b) {
  require_same_extent(a, b, "uiq_window");
  if (a.size() < 2) throw DimensionError("uiq_window: need at least two pixels");
  double q = 1.0;
  window_q(a, b, 0, 0, a.h, a.w, q);
  return q;
}

LbpHistogram lbp_histogram(const Plane& image) {
  require_min_extent(image, 3, "lbp_histogram");
  static constexpr int dy[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
  static constexpr int dx[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
  LbpHistogram hist{};
  for (std::size_t y = 1; y + 1 < image.h; ++y) {
    for (std::size_t x = 1; x + 1 < image.w; ++x) {
      const double center = image(y, x);
      unsigned code = 0;
      for (unsigned k = 0; k < 8; ++k) {
        if (image(y + dy[k], x + dx[k]) >= center) code |= 1u << k;
      }
      ++hist[code];
    }
  }
  return hist;
}

double lbp_distance(std::span<const std::uint64_t> h1, std::span<const std::uint64_t> h2) {
  if (h1.size() != h2.size()) {
    throw DimensionError("lbp_distance: bin counts " + std::to_string(h1.size()) + " and " +
                         std::to_string(h2.size()) + " differ");
  }
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < h1.size(); ++i) {
    s1 += static_cast<double>(h1[i]);
    s2 += static_cast<double>(h2[i]);
  }
  if (s1 == 0.0 || s2 == 0.0) throw DimensionError("lbp_distance: empty histogram");
  double d = 0.0;
  for (std::size_t i = 0; i < h1.size(); ++i) {
    const double p = static_cast<double>(h1[i]) / s1;
    const double q = static_cast<double>(h2[i]) / s2;
    const double diff = p - q;
    d += diff * diff / (p + q + kLbpEps);
  }
  return d;
}

MetricRow evaluate_pair(const Tensor& sr, const Tensor& hr, const MetricConfig& config, std::string id) {
  if (sr.shape() != hr.shape()) {
    throw DimensionError("evaluate " + (id.empty() ? std::string("pair") : id) + ": SR " + to_string(sr.shape()) +
                         " vs HR " + to_string(hr.shape()));
  }
  if (sr.shape().c != 3 || sr.shape().n != 1) throw DimensionError("evaluate: expected one RGB image");
  MetricRow row;
  row.id = std::move(id);

  auto score = [&](const Plane& a, const Plane& b, MetricRow& r) {
    r.ssim = ssim(a, b, config.data_range);
    r.fsim = fsim(a, b);
    r.uiq = uiq(a, b);
    const LbpHistogram ha = lbp_histogram(a);
    const LbpHistogram hb = lbp_histogram(b);
    r.lbp_chi2 = lbp_distance(ha, hb);
  };

  if (config.mode == ColorMode::y) {
    Plane a = to_luma(sr);
    Plane b = to_luma(hr);
    if (config.border > 0) {
      a = crop_border(a, config.border);
      b = crop_border(b, config.border);
    }
    row.psnr = psnr(a, b, config.data_range);
    score(a, b, row);
  } else {
    row.psnr = psnr(sr.data(), hr.data(), config.data_range);
    for (std::size_t c = 0; c < 3; ++c) {
      MetricRow r;
      score(channel_plane(sr, 0, c), channel_plane(hr, 0, c), r);
      row.ssim += r.ssim / 3.0;
      row.fsim += r.fsim / 3.0;
      row.uiq += r.uiq / 3.0;
      row.lbp_chi2 += r.lbp_chi2 / 3.0;
    }
  }
  return row;
}

MetricReport make_report(std::vector<MetricRow> rows, const MetricConfig& config) {
  std::sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) { return a.id < b.id; });
  MetricReport rep;
  rep.config = config;
  rep.aggregate.id = "mean";
  const double k = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());
  for (const MetricRow& r : rows) {
    rep.aggregate.psnr += r.psnr * k;
    rep.aggregate.ssim += r.ssim * k;
    rep.aggregate.fsim += r.fsim * k;
    rep.aggregate.uiq += r.uiq * k;
    rep.aggregate.lbp_chi2 += r.lbp_chi2 * k;
  }
  rep.per_image = std::move(rows);
  return rep;
}

MetricReport evaluate_dataset(const std::filesystem::path& sr_dir, const std::filesystem::path& hr_dir,
                              const MetricConfig& config) {
  const auto sr_files = list_images(sr_dir);
  if (!std::filesystem::is_directory(hr_dir)) throw FileError("HR directory not found: " + hr_dir.string());
  if (sr_files.empty()) throw FileError("no PNG/PPM images in SR directory: " + sr_dir.string());
  std::vector<MetricRow> rows;
  for (const auto& sr_path : sr_files) {
    const auto hr_path = hr_dir / sr_path.filename();
    if (!std::filesystem::exists(hr_path)) {
      throw FileError("missing HR counterpart for " + sr_path.filename().string() + ": " + hr_path.string());
    }
    const Tensor sr = to_tensor(load_image(sr_path));
    const Tensor hr = to_tensor(load_image(hr_path));
    rows.push_back(evaluate_pair(sr, hr, config, sr_path.filename().string()));
  }
  return make_report(std::move(rows), config);
}

void write_csv(std::ostream& os, const MetricReport& report) {
  os << "id,psnr,ssim,fsim,uiq,lbp_chi2\n";
  const auto line = [&](const MetricRow& r) {
    os << r.id << ',' << std::setprecision(10) << r.psnr << ',' << r.ssim << ',' << r.fsim << ',' << r.uiq << ','
       << r.lbp_chi2 << '\n';
  };
  for (const auto& r : report.per_image) line(r);
  line(report.aggregate);
}

void print_table(std::ostream& os, const MetricReport& report) {
  os << "mode=" << (report.config.mode == ColorMode::y ? "y" : "rgb") << " border=" << report.config.border
     << " range=" << report.config.data_range << '\n';
  os << std::left << std::setw(24) << "image" << std::right << std::setw(10) << "PSNR" << std::setw(10) << "SSIM"
     << std::setw(10) << "FSIM" << std::setw(10) << "UIQ" << std::setw(12) << "LBP chi2" << '\n';
  const auto line = [&](const MetricRow& r) {
    os << std::left << std::setw(24) << r.id << std::right << std::fixed << std::setprecision(4) << std::setw(10)
       << r.psnr << std::setw(10) << r.ssim << std::setw(10) << r.fsim << std::setw(10) << r.uiq << std::setw(12)
       << r.lbp_chi2 << '\n';
    os.unsetf(std::ios::fixed);
  };
  for (const auto& r : report.per_image) line(r);
  line(report.aggregate);
}

}  // namespace wsr
