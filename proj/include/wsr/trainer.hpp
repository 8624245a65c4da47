#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "wsr/config.hpp"
#include "wsr/dataset.hpp"
#include "wsr/loss.hpp"
#include "wsr/network.hpp"

namespace wsr {

// Bias-corrected Adam moments, one pair per parameter of a ParamSet.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  static AdamState for_params(const ParamSet& params);
};

struct AdamHyper {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// p <- p - lr * m_hat / (sqrt(v_hat) + eps), using each parameter's grad().
void adam_step(ParamSet& params, AdamState& state, const AdamHyper& hyper);

struct LossLogEntry {
  std::uint64_t iter = 0;
  double l_d = 0.0;
  double l_c = 0.0;
  double l_a = 0.0;
  double l_wavelet = 0.0;
  double l_total = 0.0;
};

void write_loss_csv_header(std::ostream& os);
void write_loss_csv_row(std::ostream& os, const LossLogEntry& e);

// Per-step bookkeeping checks, filled when TrainConfig::audit is set.
struct StepAudit {
  bool disc_step_left_generator_untouched = true;
  bool gen_step_left_discriminator_untouched = true;
  bool disc_step_updated_discriminator = false;
  bool gen_step_updated_generator = false;
  std::size_t target_colors = 0;
  std::size_t target_bands_per_color = 0;
};

// Everything a checkpoint restores.
struct TrainingState {
  TrainConfig config;
  Generator gen;
  Discriminator disc;
  AdamState gen_adam;
  AdamState disc_adam;
  std::uint64_t iteration = 0;  // completed steps; also the next batch index
};

TrainingState fresh_state(const TrainConfig& config);

// Rounds parameters and Adam moments to f32 before writing, so a run that
// continues after saving and a run resumed from the file stay identical.
void save_checkpoint(const std::filesystem::path& path, TrainingState& state);
TrainingState load_checkpoint(const std::filesystem::path& path);

FeatureExtractor make_extractor(const TrainConfig& config);

// Alternating discriminator / generator optimization over random HR crops.
class Trainer {
 public:
  Trainer(TrainingState state, CropSampler sampler);

  // One batch: discriminator update on real vs detached fake, then generator
  // update on content + adversarial + wavelet loss.
  LossLogEntry step();
  // Steps until the configured budget (iterations, else epochs) is reached.
  // `on_step` runs after every step, before any periodic checkpoint.
  std::vector<LossLogEntry> run(const std::function<void(const LossLogEntry&)>& on_step = {});
  // ceil(images / batch_size) steps.
  std::vector<LossLogEntry> train_epoch();

  std::uint64_t budget() const;
  std::size_t batches_per_epoch() const;

  TrainingState& state() { return state_; }
  const TrainingState& state() const { return state_; }
  const std::optional<StepAudit>& last_audit() const { return audit_; }
  const CropSampler& sampler() const { return sampler_; }

 private:
  TrainingState state_;
  CropSampler sampler_;
  FeatureExtractor extractor_;
  std::optional<StepAudit> audit_;
};

}  // namespace wsr
