#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wsr {

// Extents of a rank-4 tensor in [batch, channel, height, width] order.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

// Dense row-major [n][c][h][w] array of doubles with an optional gradient
// buffer of identical shape. Copies are deep (gradient included).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  Tensor(const Tensor& other);
  Tensor& operator=(const Tensor& other);
  Tensor(Tensor&&) noexcept = default;
  Tensor& operator=(Tensor&&) noexcept = default;
  ~Tensor() = default;

  // A length-k vector stored as shape [1, 1, 1, k].
  static Tensor vector(std::size_t k, double fill = 0.0) { return Tensor({1, 1, 1, k}, fill); }
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  double* plane(std::size_t n, std::size_t c) { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
  const double* plane(std::size_t n, std::size_t c) const {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }

  bool has_grad() const { return grad_ != nullptr; }
  // Allocates a zeroed gradient buffer on first use.
  Tensor& grad();
  // Throws if no gradient buffer is attached.
  const Tensor& grad() const;
  void zero_grad();
  void drop_grad() { grad_.reset(); }

  void fill(double v);

 private:
  Shape shape_{};
  std::vector<double> data_;
  std::unique_ptr<Tensor> grad_;
};

// Throws NumericError naming `where` if any value is NaN or Inf.
void check_finite(const Tensor& t, std::string_view where);
void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op);

// Cross-correlation (no kernel flip) with zero padding. Output extent per
// spatial axis is floor((in + 2*pad - k) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias, std::size_t stride,
              std::size_t pad);

struct Conv2dGrads {
  Tensor input;  // empty when not requested
  Tensor kernel;
  std::vector<double> bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out, std::size_t stride,
                            std::size_t pad, bool need_input_grad = true);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
double mse(const Tensor& a, const Tensor& b);
double sum_squares(const Tensor& a);

// Backward rules. `grad` is the upstream gradient of the op's output.
struct BinaryGrads {
  Tensor a;
  Tensor b;
};
BinaryGrads add_backward(const Tensor& grad);
BinaryGrads sub_backward(const Tensor& grad);
BinaryGrads mul_backward(const Tensor& a, const Tensor& b, const Tensor& grad);
Tensor scale_backward(const Tensor& grad, double s);
// d mse / d a; the gradient wrt b is its negation.
Tensor mse_backward(const Tensor& a, const Tensor& b, double grad_out = 1.0);

// In-place a += b (shapes must match).
void accumulate(Tensor& a, const Tensor& b);

// Concatenate along the channel axis; batch and spatial extents must match.
Tensor concat_channels(const Tensor& a, const Tensor& b);
// Select batch item i as a [1, c, h, w] tensor.
Tensor batch_item(const Tensor& t, std::size_t i);
// Stack [1, c, h, w] tensors into [k, c, h, w].
Tensor stack(std::span<const Tensor> items);

}  // namespace wsr
