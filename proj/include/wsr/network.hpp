#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wsr/tensor.hpp"

namespace wsr {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Ordered, named parameter collection. Entries are addressed by index for
// speed inside the networks and by name for checkpoints and audits.
class ParamSet {
 public:
  std::size_t add(std::string name, Shape shape, double fill = 0.0);

  std::size_t size() const { return entries_.size(); }
  NamedTensor& entry(std::size_t i) { return entries_[i]; }
  const NamedTensor& entry(std::size_t i) const { return entries_[i]; }
  Tensor& operator[](std::size_t i) { return entries_[i].value; }
  const Tensor& operator[](std::size_t i) const { return entries_[i].value; }

  // Throws ConfigError when absent.
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  void fill(double v);
  std::size_t scalar_count() const;

 private:
  std::vector<NamedTensor> entries_;
};

struct ConvSlot {
  std::size_t weight;
  std::size_t bias;
};

enum class GeneratorInput {
  pixels,   // LR RGB pixels, 3 channels
  wavelet,  // LR pixels + nearest-upsampled 1-level DWT bands, 15 channels
};

struct GeneratorConfig {
  std::size_t features = 64;
  std::size_t blocks = 8;
  GeneratorInput input = GeneratorInput::pixels;
};

inline constexpr std::size_t kColorChannels = 3;
inline constexpr std::size_t kCoeffChannels = 48;  // 3 colors x 16 packet bands
inline constexpr double kDefaultPreluSlope = 0.25;

// Intermediate activations of one generator forward pass.
struct GeneratorTrace {
  Tensor input;      // prepared network input
  Tensor embed_pre;  // embed conv output before PReLU
  Tensor embed;      // embedding output, source of the global skip
  std::vector<Tensor> block_in;
  std::vector<Tensor> block_conv1;
  std::vector<Tensor> block_act;
  Tensor trunk_in;  // output of the last residual block
  Tensor head_in;   // trunk conv + global skip
};

// Embedding conv + PReLU, B normalization-free residual blocks
// (conv-PReLU-conv with identity skip), trunk conv with a global skip from
// the embedding, and a linear head predicting 48 coefficient channels.
// Every conv is 3x3, stride 1, pad 1, so spatial extent is preserved.
class Generator {
 public:
  explicit Generator(GeneratorConfig cfg = {});

  const GeneratorConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // lr: [n, 3, h, w] with h, w >= 4 -> coefficients [n, 48, h, w].
  Tensor forward(const Tensor& lr, GeneratorTrace* trace = nullptr) const;
  // Accumulates parameter gradients from the gradient wrt the coefficients.
  void backward(const GeneratorTrace& trace, const Tensor& grad_coeffs);

  // Names of the parameters that belong to residual block i.
  std::vector<std::string> block_param_names(std::size_t i) const;

 private:
  Tensor prepare_input(const Tensor& lr) const;

  GeneratorConfig cfg_;
  ParamSet params_;
  ConvSlot embed_{};
  std::size_t embed_slope_ = 0;
  struct Block {
    ConvSlot conv1;
    std::size_t slope;
    ConvSlot conv2;
  };
  std::vector<Block> blocks_;
  ConvSlot trunk_{};
  ConvSlot head_{};
};

// Composes the generator with the inverse packet transform: [n,3,h,w] -> [n,3,4h,4w].
Tensor sr_reconstruct(const Tensor& lr, const Generator& gen);

inline constexpr double kDiscLeakySlope = 0.2;

struct DiscriminatorTrace {
  std::vector<Tensor> conv_in;   // input to each conv layer
  std::vector<Tensor> conv_out;  // pre-activation output of each conv layer
  Tensor pooled;                 // [n, C, 1, 1]
  std::vector<double> logits;
  std::vector<double> probs;
};

// 3x3 convs with LeakyReLU(0.2): 3->32 (stride 1), then (stride 1, stride 2)
// pairs 32->64 and 64->128; global average pool; dense to one logit; sigmoid.
class Discriminator {
 public:
  Discriminator();

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // image: [n, 3, H, W] with H, W >= 16. Returns one probability per item.
  std::vector<double> forward(const Tensor& image, DiscriminatorTrace* trace = nullptr) const;
  // Given d loss / d prob per item, returns d loss / d image. Parameter
  // gradients are accumulated only when `accumulate_params` is set.
  Tensor backward(const DiscriminatorTrace& trace, std::span<const double> grad_probs, bool accumulate_params);

  static constexpr std::size_t kMinExtent = 16;

 private:
  struct Layer {
    ConvSlot conv;
    std::size_t stride;
  };
  ParamSet params_;
  std::vector<Layer> layers_;
  ConvSlot dense_{};
};

// He-normal kernels (variance 2/fan_in), zero biases, PReLU slopes 0.25.
void init_params(Generator& gen, std::uint64_t seed);
void init_params(Discriminator& disc, std::uint64_t seed);

}  // namespace wsr
