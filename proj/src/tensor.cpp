#include "wsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <cblas.h>

#include "wsr/error.hpp"

namespace wsr {

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '[' << s.n << ", " << s.c << ", " << s.h << ", " << s.w << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         to_string(shape_));
  }
}

Tensor::Tensor(const Tensor& other)
    : shape_(other.shape_),
      data_(other.data_),
      grad_(other.grad_ ? std::make_unique<Tensor>(*other.grad_) : nullptr) {}

Tensor& Tensor::operator=(const Tensor& other) {
  if (this != &other) {
    shape_ = other.shape_;
    data_ = other.data_;
    grad_ = other.grad_ ? std::make_unique<Tensor>(*other.grad_) : nullptr;
  }
  return *this;
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t k = values.size();
  return Tensor({1, 1, 1, k}, std::move(values));
}

Tensor& Tensor::grad() {
  if (!grad_) grad_ = std::make_unique<Tensor>(shape_);
  return *grad_;
}

const Tensor& Tensor::grad() const {
  if (!grad_) throw std::logic_error("tensor has no gradient buffer");
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) {
    grad_->fill(0.0);
  } else {
    grad_ = std::make_unique<Tensor>(shape_);
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void check_finite(const Tensor& t, std::string_view where) {
  const auto data = t.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      std::ostringstream os;
      os << "non-finite value " << data[i] << " at flat index " << i << " after " << where;
      throw NumericError(os.str());
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

namespace {

struct ConvGeometry {
  std::size_t out_h;
  std::size_t out_w;
};

ConvGeometry conv_geometry(const Shape& in, const Shape& k, std::size_t stride, std::size_t pad) {
  if (in.c != k.c) {
    throw DimensionError("conv2d: input " + to_string(in) + " has " + std::to_string(in.c) +
                         " channels but kernel " + to_string(k) + " expects " + std::to_string(k.c));
  }
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  if (k.h == 0 || k.w == 0 || k.n == 0) throw DimensionError("conv2d: empty kernel " + to_string(k));
  if (in.h + 2 * pad < k.h || in.w + 2 * pad < k.w) {
    throw ConfigError("conv2d: kernel " + to_string(k) + " larger than padded input " + to_string(in));
  }
  return {(in.h + 2 * pad - k.h) / stride + 1, (in.w + 2 * pad - k.w) / stride + 1};
}

// Output columns [lo, hi) whose tap at kernel column `kx` lands inside the input row.
void valid_range(std::size_t in_extent, std::size_t out_extent, std::size_t kx, std::size_t stride, std::size_t pad,
                 std::size_t& lo, std::size_t& hi) {
  // Input index = o*stride + kx - pad must satisfy 0 <= idx < in_extent.
  const long p = static_cast<long>(pad);
  const long k = static_cast<long>(kx);
  const long s = static_cast<long>(stride);
  long first = 0;
  if (p > k) first = (p - k + s - 1) / s;
  long last = (static_cast<long>(in_extent) - 1 + p - k);
  last = last < 0 ? -1 : last / s;
  last = std::min(last, static_cast<long>(out_extent) - 1);
  if (last < first) {
    lo = hi = 0;
  } else {
    lo = static_cast<std::size_t>(first);
    hi = static_cast<std::size_t>(last) + 1;
  }
}

// Unfolds one batch item into a (C*KH*KW) x (OH*OW) matrix; out-of-range taps are zero.
void im2col(const double* in, const Shape& is, const Shape& ks, std::size_t oh, std::size_t ow, std::size_t stride,
            std::size_t pad, std::span<const std::size_t> col_lo, std::span<const std::size_t> col_hi, double* col) {
  const std::size_t p = oh * ow;
  std::fill(col, col + is.c * ks.h * ks.w * p, 0.0);
  for (std::size_t ic = 0; ic < is.c; ++ic) {
    const double* plane = in + ic * is.h * is.w;
    for (std::size_t ky = 0; ky < ks.h; ++ky) {
      for (std::size_t kx = 0; kx < ks.w; ++kx) {
        double* row = col + ((ic * ks.h + ky) * ks.w + kx) * p;
        const std::size_t lo = col_lo[kx], hi = col_hi[kx];
        for (std::size_t y = 0; y < oh; ++y) {
          const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(is.h)) continue;
          const double* irow = plane + static_cast<std::size_t>(iy) * is.w;
          double* dst = row + y * ow;
          for (std::size_t x = lo; x < hi; ++x) dst[x] = irow[x * stride + kx - pad];
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds the column matrix back into the image.
void col2im(const double* col, const Shape& is, const Shape& ks, std::size_t oh, std::size_t ow, std::size_t stride,
            std::size_t pad, std::span<const std::size_t> col_lo, std::span<const std::size_t> col_hi, double* out) {
  const std::size_t p = oh * ow;
  for (std::size_t ic = 0; ic < is.c; ++ic) {
    double* plane = out + ic * is.h * is.w;
    for (std::size_t ky = 0; ky < ks.h; ++ky) {
      for (std::size_t kx = 0; kx < ks.w; ++kx) {
        const double* row = col + ((ic * ks.h + ky) * ks.w + kx) * p;
        const std::size_t lo = col_lo[kx], hi = col_hi[kx];
        for (std::size_t y = 0; y < oh; ++y) {
          const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(is.h)) continue;
          double* orow = plane + static_cast<std::size_t>(iy) * is.w;
          const double* src = row + y * ow;
          for (std::size_t x = lo; x < hi; ++x) orow[x * stride + kx - pad] += src[x];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias, std::size_t stride,
              std::size_t pad) {
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  const auto [oh_n, ow_n] = conv_geometry(is, ks, stride, pad);
  if (bias.size() != ks.n) {
    throw DimensionError("conv2d: bias length " + std::to_string(bias.size()) + " does not match " +
                         std::to_string(ks.n) + " output channels");
  }
  Tensor out({is.n, ks.n, oh_n, ow_n});

  std::vector<std::size_t> col_lo(ks.w), col_hi(ks.w);
  for (std::size_t kx = 0; kx < ks.w; ++kx) valid_range(is.w, ow_n, kx, stride, pad, col_lo[kx], col_hi[kx]);

  const std::size_t p = oh_n * ow_n;
  const std::size_t depth = is.c * ks.h * ks.w;
  std::vector<double> col(depth * p);
  for (std::size_t n = 0; n < is.n; ++n) {
    im2col(input.plane(n, 0), is, ks, oh_n, ow_n, stride, pad, col_lo, col_hi, col.data());
    double* o = out.plane(n, 0);
    for (std::size_t oc = 0; oc < ks.n; ++oc) std::fill(o + oc * p, o + (oc + 1) * p, bias[oc]);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(ks.n), static_cast<int>(p),
                static_cast<int>(depth), 1.0, kernel.plane(0, 0), static_cast<int>(depth), col.data(),
                static_cast<int>(p), 1.0, o, static_cast<int>(p));
  }
  check_finite(out, "conv2d");
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out, std::size_t stride,
                            std::size_t pad, bool need_input_grad) {
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  const auto [oh_n, ow_n] = conv_geometry(is, ks, stride, pad);
  const Shape expected{is.n, ks.n, oh_n, ow_n};
  if (grad_out.shape() != expected) {
    throw DimensionError("conv2d_backward: grad_out " + to_string(grad_out.shape()) + " but forward output is " +
                         to_string(expected));
  }

  Conv2dGrads g;
  g.kernel = Tensor(ks);
  g.bias.assign(ks.n, 0.0);
  if (need_input_grad) g.input = Tensor(is);

  std::vector<std::size_t> col_lo(ks.w), col_hi(ks.w);
  for (std::size_t kx = 0; kx < ks.w; ++kx) valid_range(is.w, ow_n, kx, stride, pad, col_lo[kx], col_hi[kx]);

  const std::size_t p = oh_n * ow_n;
  const std::size_t depth = is.c * ks.h * ks.w;
  std::vector<double> col(depth * p);
  std::vector<double> gcol(need_input_grad ? depth * p : 0);
  for (std::size_t n = 0; n < is.n; ++n) {
    const double* go = grad_out.plane(n, 0);
    for (std::size_t oc = 0; oc < ks.n; ++oc) {
      double bsum = 0.0;
      for (std::size_t i = 0; i < p; ++i) bsum += go[oc * p + i];
      g.bias[oc] += bsum;
    }
    im2col(input.plane(n, 0), is, ks, oh_n, ow_n, stride, pad, col_lo, col_hi, col.data());
    // dW += dY * col^T
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(ks.n), static_cast<int>(depth),
                static_cast<int>(p), 1.0, go, static_cast<int>(p), col.data(), static_cast<int>(p), 1.0,
                g.kernel.plane(0, 0), static_cast<int>(depth));
    if (need_input_grad) {
      // dcol = W^T * dY
      cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(depth), static_cast<int>(p),
                  static_cast<int>(ks.n), 1.0, kernel.plane(0, 0), static_cast<int>(depth), go, static_cast<int>(p),
                  0.0, gcol.data(), static_cast<int>(p));
      col2im(gcol.data(), is, ks, oh_n, ow_n, stride, pad, col_lo, col_hi, g.input.plane(n, 0));
    }
  }
  return g;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  check_finite(out, "add");
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
  check_finite(out, "sub");
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  check_finite(out, "mul");
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * s;
  check_finite(out, "scale");
  return out;
}

double mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  if (a.numel() == 0) throw DimensionError("mse: empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  const double v = acc / static_cast<double>(a.numel());
  if (!std::isfinite(v)) throw NumericError("mse: non-finite result");
  return v;
}

double sum_squares(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v * v;
  return acc;
}

BinaryGrads add_backward(const Tensor& grad) { return {grad, grad}; }

BinaryGrads sub_backward(const Tensor& grad) { return {grad, scale(grad, -1.0)}; }

BinaryGrads mul_backward(const Tensor& a, const Tensor& b, const Tensor& grad) {
  require_same_shape(a, b, "mul_backward");
  require_same_shape(a, grad, "mul_backward");
  return {mul(grad, b), mul(grad, a)};
}

Tensor scale_backward(const Tensor& grad, double s) { return scale(grad, s); }

Tensor mse_backward(const Tensor& a, const Tensor& b, double grad_out) {
  require_same_shape(a, b, "mse_backward");
  Tensor g(a.shape());
  const double k = 2.0 * grad_out / static_cast<double>(a.numel());
  for (std::size_t i = 0; i < a.numel(); ++i) g[i] = k * (a[i] - b[i]);
  return g;
}

void accumulate(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "accumulate");
  auto dst = a.data();
  const auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw DimensionError("concat_channels: incompatible " + to_string(sa) + " and " + to_string(sb));
  }
  Tensor out({sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t p = sa.plane();
  for (std::size_t n = 0; n < sa.n; ++n) {
    std::copy_n(a.plane(n, 0), sa.c * p, out.plane(n, 0));
    std::copy_n(b.plane(n, 0), sb.c * p, out.plane(n, sa.c));
  }
  return out;
}

Tensor batch_item(const Tensor& t, std::size_t i) {
  const Shape& s = t.shape();
  if (i >= s.n) throw DimensionError("batch_item: index " + std::to_string(i) + " outside " + to_string(s));
  Tensor out({1, s.c, s.h, s.w});
  std::copy_n(t.plane(i, 0), s.c * s.plane(), out.plane(0, 0));
  return out;
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw DimensionError("stack: no tensors");
  const Shape first = items.front().shape();
  if (first.n != 1) throw DimensionError("stack: items must have batch extent 1, got " + to_string(first));
  Tensor out({items.size(), first.c, first.h, first.w});
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != first) {
      throw DimensionError("stack: item " + std::to_string(i) + " has shape " + to_string(items[i].shape()) +
                           ", expected " + to_string(first));
    }
    std::copy_n(items[i].plane(0, 0), first.c * first.plane(), out.plane(i, 0));
  }
  return out;
}

}  // namespace wsr
