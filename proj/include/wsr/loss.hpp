#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "wsr/network.hpp"
#include "wsr/tensor.hpp"

namespace wsr {

inline constexpr double kProbClamp = 1e-7;
inline constexpr std::uint64_t kDefaultExtractorSeed = 19;

struct LossWeights {
  double lambda_adv = 1e-3;
  double lambda_wavelet = 1.0;
  std::array<double, 16> alpha{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};

  // Throws ConfigError on a negative weight.
  void validate() const;
};

struct ExtractorTrace {
  std::vector<Tensor> conv_in;
  std::vector<Tensor> conv_out;
};

// Frozen feature map used by the content loss in place of a pretrained
// classifier. The default is three stride-2 3x3 convs (3->16->32->64) with
// ReLU, drawn once from a fixed seed. Its parameters are never trained.
class FeatureExtractor {
 public:
  enum class Kind { random_conv, identity, external };

  static FeatureExtractor random_conv(std::uint64_t seed = kDefaultExtractorSeed);
  static FeatureExtractor identity();
  // Parameters named extractor.conv<i>.weight / .bias, i = 0, 1, ...
  static FeatureExtractor from_params(ParamSet params);

  Kind kind() const { return kind_; }
  const ParamSet& params() const { return params_; }

  Tensor forward(const Tensor& x, ExtractorTrace* trace = nullptr) const;
  // Gradient wrt the extractor input only.
  Tensor backward(const ExtractorTrace& trace, const Tensor& grad) const;

 private:
  Kind kind_ = Kind::identity;
  ParamSet params_;
  std::vector<ConvSlot> convs_;
};

struct ScalarLoss {
  double value = 0.0;
  Tensor grad;  // wrt the first (predicted) argument
};

struct ProbLoss {
  double value = 0.0;
  std::vector<double> grad;
};

struct DiscLoss {
  double value = 0.0;
  std::vector<double> grad_real;
  std::vector<double> grad_fake;
};

// Mean squared error between extractor features of sr and hr.
ScalarLoss content_loss(const Tensor& sr, const Tensor& hr, const FeatureExtractor& extractor);

// sum_b alpha[b] * mean((hr_b - sr_b)^2), averaged over colors and batch.
// Both inputs are packet coefficient tensors [n, 16*C, h, w].
ScalarLoss wavelet_loss(const Tensor& coeff_sr, const Tensor& coeff_hr, std::span<const double> alpha);

// Mean over the batch of -log D(G(x)), probabilities clamped to [eps, 1-eps].
ProbLoss adversarial_loss_g(std::span<const double> d_fake);

// Mean over the batch of -log d_real - log(1 - d_fake).
DiscLoss discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake);

struct GeneratorLoss {
  double content = 0.0;
  double adversarial = 0.0;  // unweighted l_A
  double wavelet = 0.0;      // unweighted l_wavelet
  double total = 0.0;        // content + lambda_adv * adversarial + lambda_wavelet * wavelet
  Tensor grad_sr;            // from the content term
  std::vector<double> grad_d_fake;
  Tensor grad_coeffs;  // from the wavelet term
};

GeneratorLoss generator_total_loss(const Tensor& sr, const Tensor& hr, std::span<const double> d_fake,
                                   const Tensor& coeff_sr, const Tensor& coeff_hr, const LossWeights& weights,
                                   const FeatureExtractor& extractor);

}  // namespace wsr
