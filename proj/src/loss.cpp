#include "wsr/loss.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "wsr/error.hpp"
#include "wsr/layers.hpp"
#include "wsr/wavelet.hpp"

namespace wsr {

void LossWeights::validate() const {
  if (lambda_adv < 0.0 || !std::isfinite(lambda_adv)) throw ConfigError("lambda_adv must be >= 0");
  if (lambda_wavelet < 0.0 || !std::isfinite(lambda_wavelet)) throw ConfigError("lambda_wavelet must be >= 0");
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] < 0.0 || !std::isfinite(alpha[i])) {
      throw ConfigError("alpha[" + std::to_string(i) + "] must be >= 0");
    }
  }
}

FeatureExtractor FeatureExtractor::random_conv(std::uint64_t seed) {
  ParamSet p;
  const std::size_t chans[] = {3, 16, 32, 64};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string prefix = "extractor.conv" + std::to_string(i);
    p.add(prefix + ".weight", {chans[i + 1], chans[i], 3, 3});
    p.add(prefix + ".bias", {1, 1, 1, chans[i + 1]});
  }
  std::mt19937_64 rng(seed);
  for (auto& e : p) {
    if (!e.name.ends_with(".weight")) continue;
    const Shape& s = e.value.shape();
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(s.c * s.h * s.w)));
    for (double& v : e.value.data()) v = dist(rng);
  }
  FeatureExtractor fx = from_params(std::move(p));
  fx.kind_ = Kind::random_conv;
  return fx;
}

FeatureExtractor FeatureExtractor::identity() { return FeatureExtractor{}; }

FeatureExtractor FeatureExtractor::from_params(ParamSet params) {
  FeatureExtractor fx;
  fx.kind_ = Kind::external;
  std::size_t in_ch = kColorChannels;
  for (std::size_t i = 0;; ++i) {
    const std::string prefix = "extractor.conv" + std::to_string(i);
    if (!params.contains(prefix + ".weight")) break;
    ConvSlot slot{};
    for (std::size_t j = 0; j < params.size(); ++j) {
      if (params.entry(j).name == prefix + ".weight") slot.weight = j;
      if (params.entry(j).name == prefix + ".bias") slot.bias = j;
    }
    if (!params.contains(prefix + ".bias")) throw ConfigError("extractor: missing " + prefix + ".bias");
    const Shape& ws = params[slot.weight].shape();
    if (ws.c != in_ch || ws.h != 3 || ws.w != 3 || params[slot.bias].numel() != ws.n) {
      throw DimensionError("extractor: layer " + prefix + " has incompatible shape " + to_string(ws));
    }
    in_ch = ws.n;
    fx.convs_.push_back(slot);
  }
  if (fx.convs_.empty()) throw ConfigError("extractor: no extractor.conv0.weight parameter found");
  fx.params_ = std::move(params);
  return fx;
}

Tensor FeatureExtractor::forward(const Tensor& x, ExtractorTrace* trace) const {
  if (kind_ == Kind::identity) return x;
  Tensor h = x;
  for (const ConvSlot& slot : convs_) {
    Tensor z = conv2d(h, params_[slot.weight], params_[slot.bias].data(), 2, 1);
    Tensor a = relu(z);
    if (trace) {
      trace->conv_in.push_back(std::move(h));
      trace->conv_out.push_back(std::move(z));
    }
    h = std::move(a);
  }
  return h;
}

Tensor FeatureExtractor::backward(const ExtractorTrace& trace, const Tensor& grad) const {
  if (kind_ == Kind::identity) return grad;
  Tensor g = grad;
  for (std::size_t i = convs_.size(); i-- > 0;) {
    g = relu_backward(trace.conv_out[i], g);
    g = conv2d_backward(trace.conv_in[i], params_[convs_[i].weight], g, 2, 1, true).input;
  }
  return g;
}

ScalarLoss content_loss(const Tensor& sr, const Tensor& hr, const FeatureExtractor& extractor) {
  require_same_shape(sr, hr, "content_loss");
  ExtractorTrace trace;
  const Tensor f_sr = extractor.forward(sr, &trace);
  const Tensor f_hr = extractor.forward(hr);
  ScalarLoss out;
  out.value = mse(f_sr, f_hr);
  out.grad = extractor.backward(trace, mse_backward(f_sr, f_hr));
  return out;
}

ScalarLoss wavelet_loss(const Tensor& coeff_sr, const Tensor& coeff_hr, std::span<const double> alpha) {
  require_same_shape(coeff_sr, coeff_hr, "wavelet_loss");
  if (alpha.size() != kBandsPerChannel) {
    throw DimensionError("wavelet_loss: alpha has " + std::to_string(alpha.size()) + " entries, expected 16");
  }
  const Shape& s = coeff_sr.shape();
  if (s.c == 0 || s.c % kBandsPerChannel != 0) {
    throw DimensionError("wavelet_loss: channel count " + std::to_string(s.c) + " is not a multiple of 16");
  }
  const std::size_t colors = s.c / kBandsPerChannel;
  const double norm = 1.0 / static_cast<double>(s.n * colors * s.plane());
  ScalarLoss out;
  out.grad = Tensor(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t ch = 0; ch < s.c; ++ch) {
      const double a = alpha[ch % kBandsPerChannel];
      const double* ps = coeff_sr.plane(n, ch);
      const double* ph = coeff_hr.plane(n, ch);
      double* g = out.grad.plane(n, ch);
      double acc = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const double d = ps[i] - ph[i];
        acc += d * d;
        g[i] = 2.0 * a * norm * d;
      }
      out.value += a * norm * acc;
    }
  }
  if (!std::isfinite(out.value)) throw NumericError("wavelet_loss: non-finite value");
  return out;
}

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }
bool inside_clamp(double p) { return p > kProbClamp && p < 1.0 - kProbClamp; }

}  // namespace

ProbLoss adversarial_loss_g(std::span<const double> d_fake) {
  if (d_fake.empty()) throw DimensionError("adversarial_loss_g: empty batch");
  const double inv = 1.0 / static_cast<double>(d_fake.size());
  ProbLoss out;
  out.grad.resize(d_fake.size());
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    const double p = clamp_prob(d_fake[i]);
    out.value -= std::log(p) * inv;
    out.grad[i] = inside_clamp(d_fake[i]) ? -inv / p : 0.0;
  }
  return out;
}

DiscLoss discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.empty() || d_real.size() != d_fake.size()) {
    throw DimensionError("discriminator_loss: batch sizes " + std::to_string(d_real.size()) + " and " +
                         std::to_string(d_fake.size()) + " must match and be nonzero");
  }
  const double inv = 1.0 / static_cast<double>(d_real.size());
  DiscLoss out;
  out.grad_real.resize(d_real.size());
  out.grad_fake.resize(d_fake.size());
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    const double r = clamp_prob(d_real[i]);
    const double f = clamp_prob(d_fake[i]);
    out.value += (-std::log(r) - std::log(1.0 - f)) * inv;
    out.grad_real[i] = inside_clamp(d_real[i]) ? -inv / r : 0.0;
    out.grad_fake[i] = inside_clamp(d_fake[i]) ? inv / (1.0 - f) : 0.0;
  }
  return out;
}

GeneratorLoss generator_total_loss(const Tensor& sr, const Tensor& hr, std::span<const double> d_fake,
                                   const Tensor& coeff_sr, const Tensor& coeff_hr, const LossWeights& weights,
                                   const FeatureExtractor& extractor) {
  weights.validate();
  if (d_fake.size() != sr.shape().n) {
    throw DimensionError("generator_total_loss: " + std::to_string(d_fake.size()) +
                         " discriminator outputs for batch " + std::to_string(sr.shape().n));
  }
  GeneratorLoss out;
  ScalarLoss c = content_loss(sr, hr, extractor);
  ProbLoss a = adversarial_loss_g(d_fake);
  ScalarLoss w = wavelet_loss(coeff_sr, coeff_hr, weights.alpha);

  out.content = c.value;
  out.adversarial = a.value;
  out.wavelet = w.value;
  out.total = out.content + weights.lambda_adv * out.adversarial + weights.lambda_wavelet * out.wavelet;
  out.grad_sr = std::move(c.grad);
  out.grad_d_fake = std::move(a.grad);
  for (double& g : out.grad_d_fake) g *= weights.lambda_adv;
  out.grad_coeffs = scale(w.grad, weights.lambda_wavelet);
  if (!std::isfinite(out.total)) throw NumericError("generator_total_loss: non-finite total");
  return out;
}

}  // namespace wsr
