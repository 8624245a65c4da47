#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "wsr/loss.hpp"
#include "wsr/network.hpp"

namespace wsr {

// Training hyperparameters. Text form is UTF-8, one `key = value` per line,
// `#` starts a comment; unknown keys are rejected.
struct TrainConfig {
  double learning_rate = 2e-4;
  std::size_t batch_size = 16;
  std::uint64_t iterations = 500;  // wins over `epochs` when both are set
  std::uint64_t epochs = 0;
  std::uint64_t seed = 1;
  LossWeights weights;
  bool adversarial = true;  // false drops l_A from the generator update
  GeneratorConfig model;
  std::string data;
  std::size_t crop_size = 88;
  std::size_t scale = 4;
  std::uint64_t checkpoint_interval = 100;
  std::string output = "run";
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string extractor = "random";  // random | identity | path to a checkpoint file
  std::uint64_t extractor_seed = kDefaultExtractorSeed;
  bool audit = false;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;
  // Applies one `key = value` assignment; ConfigError names unknown keys.
  void set(std::string_view key, std::string_view value);
  std::string to_text() const;
  static TrainConfig from_text(std::string_view text);
  static TrainConfig from_file(const std::filesystem::path& path);
  bool operator==(const TrainConfig&) const;
};

}  // namespace wsr
