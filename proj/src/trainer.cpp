#include "wsr/trainer.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "wsr/checkpoint.hpp"
#include "wsr/error.hpp"
#include "wsr/wavelet.hpp"

namespace wsr {

AdamState AdamState::for_params(const ParamSet& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.shape());
    s.v.emplace_back(p.value.shape());
  }
  return s;
}

void adam_step(ParamSet& params, AdamState& state, const AdamHyper& hyper) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state has " + std::to_string(state.m.size()) + " slots for " +
                         std::to_string(params.size()) + " parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    if (m.shape() != p.shape() || v.shape() != p.shape()) {
      throw DimensionError("adam_step: moment shape " + to_string(m.shape()) + " does not match parameter " +
                           params.entry(i).name + " " + to_string(p.shape()));
    }
    const Tensor& g = p.grad();
    for (std::size_t k = 0; k < p.numel(); ++k) {
      m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g[k];
      v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
  }
}

void write_loss_csv_header(std::ostream& os) { os << "iter,l_d,l_c,l_a,l_wavelet,l_total\n"; }

void write_loss_csv_row(std::ostream& os, const LossLogEntry& e) {
  const auto old = os.precision(12);
  os << e.iter << ',' << e.l_d << ',' << e.l_c << ',' << e.l_a << ',' << e.l_wavelet << ',' << e.l_total << '\n';
  os.precision(old);
}

namespace {

constexpr std::uint64_t kDiscSeedOffset = 0x9E3779B97F4A7C15ull;

AdamHyper hyper_from(const TrainConfig& c) { return {c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_eps}; }

std::vector<std::vector<double>> snapshot(const ParamSet& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.push_back(p.value.values());
  return out;
}

bool same_values(const ParamSet& params, const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].values() != snap[i]) return false;
  }
  return true;
}

void append_params(std::vector<CheckpointEntry>& out, ParamSet& params) {
  for (auto& p : params) {
    snap_to_f32(p.value);
    out.push_back(to_entry(p.name, p.value));
  }
}

void append_adam(std::vector<CheckpointEntry>& out, const std::string& tag, const ParamSet& params, AdamState& s) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    snap_to_f32(s.m[i]);
    snap_to_f32(s.v[i]);
    out.push_back(to_entry("adam." + tag + ".m." + params.entry(i).name, s.m[i]));
    out.push_back(to_entry("adam." + tag + ".v." + params.entry(i).name, s.v[i]));
  }
  out.push_back(u64_entry("meta.adam." + tag + ".step", s.step));
}

AdamState read_adam(const std::vector<CheckpointEntry>& entries, const std::string& tag, const ParamSet& params) {
  AdamState s;
  for (const auto& p : params) {
    Tensor m = from_entry(find_entry(entries, "adam." + tag + ".m." + p.name));
    Tensor v = from_entry(find_entry(entries, "adam." + tag + ".v." + p.name));
    if (m.shape() != p.value.shape() || v.shape() != p.value.shape()) {
      throw DimensionError("checkpoint: Adam moments for " + p.name + " do not match the parameter shape");
    }
    s.m.push_back(std::move(m));
    s.v.push_back(std::move(v));
  }
  s.step = entry_u64(find_entry(entries, "meta.adam." + tag + ".step"));
  return s;
}

}  // namespace

TrainingState fresh_state(const TrainConfig& config) {
  config.validate();
  TrainingState s{config, Generator(config.model), Discriminator(), {}, {}, 0};
  init_params(s.gen, config.seed);
  init_params(s.disc, config.seed + kDiscSeedOffset);
  s.gen_adam = AdamState::for_params(s.gen.params());
  s.disc_adam = AdamState::for_params(s.disc.params());
  return s;
}

void save_checkpoint(const std::filesystem::path& path, TrainingState& state) {
  std::vector<CheckpointEntry> entries;
  append_params(entries, state.gen.params());
  append_params(entries, state.disc.params());
  append_adam(entries, "gen", state.gen.params(), state.gen_adam);
  append_adam(entries, "disc", state.disc.params(), state.disc_adam);
  entries.push_back(u64_entry("meta.iteration", state.iteration));
  entries.push_back(text_entry("meta.config", state.config.to_text()));
  write_checkpoint_file(path, entries);
}

TrainingState load_checkpoint(const std::filesystem::path& path) {
  const auto entries = read_checkpoint_file(path);
  TrainConfig config = TrainConfig::from_text(entry_text(find_entry(entries, "meta.config")));
  Generator gen = generator_from_entries(entries);
  if (gen.config().features != config.model.features || gen.config().blocks != config.model.blocks) {
    throw FormatError(path.string() + ": generator shapes disagree with the stored config");
  }
  Discriminator disc;
  load_params(disc.params(), entries, path.string());
  TrainingState s{std::move(config), std::move(gen), std::move(disc), {}, {}, 0};
  s.gen_adam = read_adam(entries, "gen", s.gen.params());
  s.disc_adam = read_adam(entries, "disc", s.disc.params());
  s.iteration = entry_u64(find_entry(entries, "meta.iteration"));
  return s;
}

FeatureExtractor make_extractor(const TrainConfig& config) {
  if (config.extractor == "random") return FeatureExtractor::random_conv(config.extractor_seed);
  if (config.extractor == "identity") return FeatureExtractor::identity();
  const auto entries = read_checkpoint_file(config.extractor);
  ParamSet params;
  for (const auto& e : entries) {
    if (!e.name.starts_with("extractor.")) continue;
    Tensor t = from_entry(e);
    params.add(e.name, t.shape());
    params.get(e.name) = std::move(t);
  }
  return FeatureExtractor::from_params(std::move(params));
}

Trainer::Trainer(TrainingState state, CropSampler sampler)
    : state_(std::move(state)), sampler_(std::move(sampler)), extractor_(make_extractor(state_.config)) {
  state_.config.validate();
  if (sampler_.crop_size() != state_.config.crop_size) {
    throw ConfigError("sampler crop size " + std::to_string(sampler_.crop_size()) + " differs from config crop_size " +
                      std::to_string(state_.config.crop_size));
  }
}

LossLogEntry Trainer::step() {
  const TrainConfig& cfg = state_.config;
  const std::uint64_t iter = state_.iteration;
  Generator& gen = state_.gen;
  Discriminator& disc = state_.disc;
  std::optional<StepAudit> audit;
  if (cfg.audit) audit.emplace();

  LossLogEntry log;
  log.iter = iter + 1;
  try {
    // HR crops and their bicubic LR counterparts.
    const LrHrPair batch = sampler_.batch(iter, cfg.batch_size);

    // Discriminator update; the fake batch is a plain tensor, so no
    // gradient can reach the generator.
    std::vector<std::vector<double>> gen_before, disc_before;
    if (audit) gen_before = snapshot(gen.params());
    {
      const Tensor fake = sr_reconstruct(batch.lr, gen);
      DiscriminatorTrace real_trace, fake_trace;
      const auto d_real = disc.forward(batch.hr, &real_trace);
      const auto d_fake = disc.forward(fake, &fake_trace);
      const DiscLoss ld = discriminator_loss(d_real, d_fake);
      log.l_d = ld.value;
      disc.params().zero_grad();
      disc.backward(real_trace, ld.grad_real, true);
      disc.backward(fake_trace, ld.grad_fake, true);
      if (audit) disc_before = snapshot(disc.params());
      adam_step(disc.params(), state_.disc_adam, hyper_from(cfg));
    }
    if (audit) {
      audit->disc_step_left_generator_untouched = same_values(gen.params(), gen_before);
      audit->disc_step_updated_discriminator = !same_values(disc.params(), disc_before);
    }

    // Packet coefficients of the HR batch are the wavelet-loss targets.
    const SubbandSet target = wpt2(batch.hr);
    if (audit) {
      audit->target_colors = target.colors();
      audit->target_bands_per_color = target.coeffs().shape().c / target.colors();
    }

    // Generator update.
    if (audit) disc_before = snapshot(disc.params());
    GeneratorTrace g_trace;
    Tensor coeffs = gen.forward(batch.lr, &g_trace);
    const Tensor sr = iwpt2(SubbandSet(coeffs));
    DiscriminatorTrace d_trace;
    const auto d_out = disc.forward(sr, &d_trace);
    LossWeights weights = cfg.weights;
    if (!cfg.adversarial) weights.lambda_adv = 0.0;
    const GeneratorLoss gl =
        generator_total_loss(sr, batch.hr, d_out, coeffs, target.coeffs(), weights, extractor_);
    log.l_c = gl.content;
    log.l_a = gl.adversarial;
    log.l_wavelet = gl.wavelet;
    log.l_total = gl.total;

    Tensor grad_sr = gl.grad_sr;
    if (weights.lambda_adv != 0.0) accumulate(grad_sr, disc.backward(d_trace, gl.grad_d_fake, false));
    Tensor grad_coeffs = gl.grad_coeffs;
    accumulate(grad_coeffs, iwpt2_backward(grad_sr));
    gen.params().zero_grad();
    if (audit) gen_before = snapshot(gen.params());
    gen.backward(g_trace, grad_coeffs);
    adam_step(gen.params(), state_.gen_adam, hyper_from(cfg));
    if (audit) {
      audit->gen_step_left_discriminator_untouched = same_values(disc.params(), disc_before);
      audit->gen_step_updated_generator = !same_values(gen.params(), gen_before);
    }
  } catch (const NumericError& e) {
    throw NumericError("iteration " + std::to_string(iter + 1) + ": " + e.what());
  }

  for (double v : {log.l_d, log.l_c, log.l_a, log.l_wavelet, log.l_total}) {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite loss at iteration " << log.iter << ": l_d=" << log.l_d << " l_c=" << log.l_c
         << " l_a=" << log.l_a << " l_wavelet=" << log.l_wavelet << " l_total=" << log.l_total;
      throw NumericError(os.str());
    }
  }
  if (audit) {
    const bool ok = audit->disc_step_left_generator_untouched && audit->gen_step_left_discriminator_untouched &&
                    audit->target_colors == kColorChannels && audit->target_bands_per_color == kBandsPerChannel;
    audit_ = audit;
    if (!ok) throw std::logic_error("training audit failed at iteration " + std::to_string(log.iter));
  }
  state_.iteration = iter + 1;
  return log;
}

std::size_t Trainer::batches_per_epoch() const {
  return (sampler_.image_count() + state_.config.batch_size - 1) / state_.config.batch_size;
}

std::uint64_t Trainer::budget() const {
  if (state_.config.iterations > 0) return state_.config.iterations;
  return state_.config.epochs * batches_per_epoch();
}

std::vector<LossLogEntry> Trainer::run(const std::function<void(const LossLogEntry&)>& on_step) {
  std::vector<LossLogEntry> log;
  const std::uint64_t interval = state_.config.checkpoint_interval;
  while (state_.iteration < budget()) {
    log.push_back(step());
    if (on_step) on_step(log.back());
    if (interval > 0 && state_.iteration % interval == 0) {
      save_checkpoint(std::filesystem::path(state_.config.output) /
                          ("ckpt_" + std::to_string(state_.iteration) + ".wsr"),
                      state_);
    }
  }
  return log;
}

std::vector<LossLogEntry> Trainer::train_epoch() {
  std::vector<LossLogEntry> log;
  for (std::size_t i = 0; i < batches_per_epoch(); ++i) log.push_back(step());
  return log;
}

}  // namespace wsr
