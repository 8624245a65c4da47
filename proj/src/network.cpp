#include "wsr/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "wsr/error.hpp"
#include "wsr/layers.hpp"
#include "wsr/wavelet.hpp"

namespace wsr {

std::size_t ParamSet::add(std::string name, Shape shape, double fill) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  entries_.push_back({std::move(name), Tensor(shape, fill)});
  return entries_.size() - 1;
}

Tensor& ParamSet::get(std::string_view name) {
  for (auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw ConfigError("unknown parameter: " + std::string(name));
}

const Tensor& ParamSet::get(std::string_view name) const { return const_cast<ParamSet*>(this)->get(name); }

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const NamedTensor& e) { return e.name == name; });
}

void ParamSet::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

void ParamSet::fill(double v) {
  for (auto& e : entries_) e.value.fill(v);
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

namespace {

ConvSlot add_conv(ParamSet& p, const std::string& prefix, std::size_t in, std::size_t out, std::size_t k) {
  return {p.add(prefix + ".weight", {out, in, k, k}), p.add(prefix + ".bias", {1, 1, 1, out})};
}

Tensor run_conv(const ParamSet& p, ConvSlot slot, const Tensor& x, std::size_t stride, std::size_t pad) {
  return conv2d(x, p[slot.weight], p[slot.bias].data(), stride, pad);
}

// Backprop through a conv, accumulating into the slot's parameter grads.
Tensor conv_back(ParamSet& p, ConvSlot slot, const Tensor& x, const Tensor& grad, std::size_t stride,
                 std::size_t pad, bool need_input, bool accumulate_params = true) {
  auto g = conv2d_backward(x, p[slot.weight], grad, stride, pad, need_input);
  if (accumulate_params) {
    accumulate(p[slot.weight].grad(), g.kernel);
    Tensor& gb = p[slot.bias].grad();
    for (std::size_t i = 0; i < g.bias.size(); ++i) gb[i] += g.bias[i];
  }
  return std::move(g.input);
}

}  // namespace

Generator::Generator(GeneratorConfig cfg) : cfg_(cfg) {
  if (cfg_.features == 0) throw ConfigError("generator: features must be positive");
  const std::size_t in_ch = cfg_.input == GeneratorInput::pixels ? kColorChannels : kColorChannels * 5;
  const std::size_t f = cfg_.features;
  embed_ = add_conv(params_, "gen.embed", in_ch, f, 3);
  embed_slope_ = params_.add("gen.embed.prelu", {1, 1, 1, f}, kDefaultPreluSlope);
  for (std::size_t i = 0; i < cfg_.blocks; ++i) {
    const std::string prefix = "gen.block" + std::to_string(i);
    Block b{};
    b.conv1 = add_conv(params_, prefix + ".conv1", f, f, 3);
    b.slope = params_.add(prefix + ".prelu", {1, 1, 1, f}, kDefaultPreluSlope);
    b.conv2 = add_conv(params_, prefix + ".conv2", f, f, 3);
    blocks_.push_back(b);
  }
  trunk_ = add_conv(params_, "gen.trunk", f, f, 3);
  head_ = add_conv(params_, "gen.head", f, kCoeffChannels, 3);
}

std::vector<std::string> Generator::block_param_names(std::size_t i) const {
  std::vector<std::string> names;
  const std::string prefix = "gen.block" + std::to_string(i) + ".";
  for (const auto& e : params_) {
    if (e.name.starts_with(prefix)) names.push_back(e.name.substr(prefix.size()));
  }
  return names;
}

Tensor Generator::prepare_input(const Tensor& lr) const {
  const Shape& s = lr.shape();
  if (s.c != kColorChannels) {
    throw DimensionError("generator: expected 3-channel input, got " + to_string(s));
  }
  if (s.h < 4 || s.w < 4) throw DimensionError("generator: input extent below 4x4: " + to_string(s));
  if (cfg_.input == GeneratorInput::pixels) return lr;

  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw DimensionError("generator: wavelet input mode needs even extents, got " + to_string(s));
  }
  Tensor bands({s.n, kColorChannels * 4, s.h / 2, s.w / 2});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < kColorChannels; ++c) {
      Plane p(s.h, s.w);
      std::copy_n(lr.plane(n, c), s.plane(), p.v.begin());
      const Dwt2d d = dwt2d(p);
      const Plane* parts[4] = {&d.ll, &d.lh, &d.hl, &d.hh};
      for (std::size_t b = 0; b < 4; ++b) std::copy(parts[b]->v.begin(), parts[b]->v.end(), bands.plane(n, 4 * c + b));
    }
  }
  return concat_channels(lr, upsample_nearest(bands, 2));
}

Tensor Generator::forward(const Tensor& lr, GeneratorTrace* trace) const {
  Tensor x = prepare_input(lr);
  Tensor e_pre = run_conv(params_, embed_, x, 1, 1);
  Tensor e = prelu(e_pre, params_[embed_slope_]);

  Tensor h = e;
  for (const Block& b : blocks_) {
    Tensor t1 = run_conv(params_, b.conv1, h, 1, 1);
    Tensor t2 = prelu(t1, params_[b.slope]);
    Tensor t3 = run_conv(params_, b.conv2, t2, 1, 1);
    Tensor next = add(h, t3);
    if (trace) {
      trace->block_in.push_back(std::move(h));
      trace->block_conv1.push_back(std::move(t1));
      trace->block_act.push_back(std::move(t2));
    }
    h = std::move(next);
  }
  Tensor u = add(run_conv(params_, trunk_, h, 1, 1), e);
  Tensor out = run_conv(params_, head_, u, 1, 1);
  if (trace) {
    trace->input = std::move(x);
    trace->embed_pre = std::move(e_pre);
    trace->embed = std::move(e);
    trace->trunk_in = std::move(h);
    trace->head_in = std::move(u);
  }
  return out;
}

void Generator::backward(const GeneratorTrace& trace, const Tensor& grad_coeffs) {
  if (trace.block_in.size() != blocks_.size()) throw std::logic_error("generator backward: trace is incomplete");
  Tensor g_u = conv_back(params_, head_, trace.head_in, grad_coeffs, 1, 1, true);
  Tensor g_h = conv_back(params_, trunk_, trace.trunk_in, g_u, 1, 1, true);
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    const Block& b = blocks_[i];
    Tensor g_act = conv_back(params_, b.conv2, trace.block_act[i], g_h, 1, 1, true);
    PreluGrads pg = prelu_backward(trace.block_conv1[i], params_[b.slope], g_act);
    accumulate(params_[b.slope].grad(), pg.slope);
    Tensor g_in = conv_back(params_, b.conv1, trace.block_in[i], pg.x, 1, 1, true);
    accumulate(g_h, g_in);
  }
  accumulate(g_h, g_u);
  PreluGrads pe = prelu_backward(trace.embed_pre, params_[embed_slope_], g_h);
  accumulate(params_[embed_slope_].grad(), pe.slope);
  conv_back(params_, embed_, trace.input, pe.x, 1, 1, false);
}

Tensor sr_reconstruct(const Tensor& lr, const Generator& gen) { return iwpt2(SubbandSet(gen.forward(lr))); }

Discriminator::Discriminator() {
  struct LayerDef {
    std::size_t in, out, stride;
  };
  const LayerDef defs[] = {{3, 32, 1}, {32, 64, 1}, {64, 64, 2}, {64, 128, 1}, {128, 128, 2}};
  std::size_t i = 0;
  for (const LayerDef& s : defs) {
    layers_.push_back({add_conv(params_, "disc.conv" + std::to_string(i++), s.in, s.out, 3), s.stride});
  }
  // Dense layer as a 1x1 conv over the pooled [n, 128, 1, 1] features.
  dense_ = add_conv(params_, "disc.dense", 128, 1, 1);
}

std::vector<double> Discriminator::forward(const Tensor& image, DiscriminatorTrace* trace) const {
  const Shape& s = image.shape();
  if (s.c != kColorChannels) throw DimensionError("discriminator: expected 3 channels, got " + to_string(s));
  if (s.h < kMinExtent || s.w < kMinExtent) {
    throw DimensionError("discriminator: input " + to_string(s) + " is smaller than 16x16");
  }
  Tensor x = image;
  for (const Layer& l : layers_) {
    Tensor z = run_conv(params_, l.conv, x, l.stride, 1);
    Tensor a = leaky_relu(z, kDiscLeakySlope);
    if (trace) {
      trace->conv_in.push_back(std::move(x));
      trace->conv_out.push_back(std::move(z));
    }
    x = std::move(a);
  }
  Tensor pooled = global_avg_pool(x);
  Tensor logit = run_conv(params_, dense_, pooled, 1, 0);
  std::vector<double> probs(s.n);
  // Saturated logits would round to exactly 0 or 1; keep the open interval.
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  for (std::size_t n = 0; n < s.n; ++n) probs[n] = std::clamp(sigmoid(logit[n]), lo, hi);
  if (trace) {
    trace->pooled = std::move(pooled);
    trace->logits.assign(logit.data().begin(), logit.data().end());
    trace->probs = probs;
  }
  return probs;
}

Tensor Discriminator::backward(const DiscriminatorTrace& trace, std::span<const double> grad_probs,
                               bool accumulate_params) {
  const std::size_t n = trace.probs.size();
  if (grad_probs.size() != n || trace.conv_in.size() != layers_.size()) {
    throw DimensionError("discriminator backward: gradient length " + std::to_string(grad_probs.size()) +
                         " does not match batch " + std::to_string(n));
  }
  Tensor g_logit({n, 1, 1, 1});
  for (std::size_t i = 0; i < n; ++i) g_logit[i] = grad_probs[i] * trace.probs[i] * (1.0 - trace.probs[i]);
  Tensor g = conv_back(params_, dense_, trace.pooled, g_logit, 1, 0, true, accumulate_params);
  g = global_avg_pool_backward(trace.conv_out.back().shape(), g);
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = leaky_relu_backward(trace.conv_out[i], kDiscLeakySlope, g);
    g = conv_back(params_, layers_[i].conv, trace.conv_in[i], g, layers_[i].stride, 1, true, accumulate_params);
  }
  return g;
}

namespace {

void he_init(ParamSet& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& e : params) {
    Tensor& t = e.value;
    if (e.name.ends_with(".weight")) {
      const Shape& s = t.shape();
      const double fan_in = static_cast<double>(s.c * s.h * s.w);
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (double& v : t.data()) v = dist(rng);
    } else if (e.name.ends_with(".prelu")) {
      t.fill(kDefaultPreluSlope);
    } else {
      t.fill(0.0);
    }
  }
}

}  // namespace

void init_params(Generator& gen, std::uint64_t seed) { he_init(gen.params(), seed); }

void init_params(Discriminator& disc, std::uint64_t seed) { he_init(disc.params(), seed); }

}  // namespace wsr
