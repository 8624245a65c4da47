// wsr: train, super-resolve, evaluate and inspect wavelet-domain SR models.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wsr/checkpoint.hpp"
#include "wsr/config.hpp"
#include "wsr/dataset.hpp"
#include "wsr/error.hpp"
#include "wsr/image_io.hpp"
#include "wsr/metrics.hpp"
#include "wsr/network.hpp"
#include "wsr/trainer.hpp"
#include "wsr/wavelet.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainArgs {
  std::string config_path;
  std::string resume;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> iters;
  std::optional<std::uint64_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> crop;
  std::optional<std::size_t> features;
  std::optional<std::size_t> blocks;
  std::optional<std::uint64_t> checkpoint_every;
  std::string input_mode;
  bool no_adv = false;
  bool audit = false;
  std::uint64_t log_every = 10;
};

struct SrArgs {
  std::string model;
  std::string in;
  std::string out;
};

struct EvalArgs {
  std::string sr;
  std::string hr;
  std::string mode = "y";
  std::string csv;
  std::size_t border = 4;
};

struct WptArgs {
  std::string in;
  std::string out;
  std::string inverse;
  std::string channel = "y";
};

// Builds the effective config. Everything thrown here is a usage problem.
wsr::TrainConfig train_config(const TrainArgs& a) {
  wsr::TrainConfig c;
  if (!a.config_path.empty()) {
    std::ifstream probe(a.config_path);
    if (!probe) throw wsr::FileError("cannot open config file: " + a.config_path);
    c = wsr::TrainConfig::from_file(a.config_path);
  }
  if (!a.data.empty()) c.data = a.data;
  if (!a.out.empty()) c.output = a.out;
  if (a.iters) c.iterations = *a.iters;
  if (a.epochs) c.epochs = *a.epochs;
  if (a.seed) c.seed = *a.seed;
  if (a.lr) c.learning_rate = *a.lr;
  if (a.batch) c.batch_size = *a.batch;
  if (a.crop) c.crop_size = *a.crop;
  if (a.features) c.model.features = *a.features;
  if (a.blocks) c.model.blocks = *a.blocks;
  if (a.checkpoint_every) c.checkpoint_interval = *a.checkpoint_every;
  if (!a.input_mode.empty()) c.set("input", a.input_mode);
  if (a.no_adv) c.adversarial = false;
  if (a.audit) c.audit = true;
  c.validate();
  if (c.data.empty()) throw wsr::ConfigError("no dataset given (use --data or `data = ...` in the config)");
  return c;
}

wsr::TrainingState resume_state(const TrainArgs& a) {
  if (!a.config_path.empty() || !a.data.empty() || a.epochs || a.seed || a.lr || a.batch || a.crop || a.features ||
      a.blocks || !a.input_mode.empty() || a.no_adv) {
    throw UsageError("--resume restores the stored config; only --iters, --out, --checkpoint-every and --audit apply");
  }
  wsr::TrainingState s = wsr::load_checkpoint(a.resume);
  if (a.iters) s.config.iterations = *a.iters;
  if (!a.out.empty()) s.config.output = a.out;
  if (a.checkpoint_every) s.config.checkpoint_interval = *a.checkpoint_every;
  if (a.audit) s.config.audit = true;
  return s;
}

int cmd_train(const TrainArgs& a) {
  std::optional<wsr::TrainingState> state;
  try {
    if (!a.resume.empty()) {
      state.emplace(resume_state(a));
    } else {
      state.emplace(wsr::fresh_state(train_config(a)));
    }
  } catch (const wsr::ConfigError& e) {
    std::cerr << "wsr train: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "wsr train: " << e.what() << '\n';
    return kExitUsage;
  }
  const wsr::TrainConfig& cfg = state->config;
  const fs::path out_dir = cfg.output;

  wsr::CropSampler sampler = wsr::CropSampler::from_directory(cfg.data, cfg.crop_size, cfg.seed);
  wsr::Trainer trainer(std::move(*state), std::move(sampler));
  fs::create_directories(out_dir);

  const fs::path log_path = out_dir / "loss.csv";
  const bool append = !a.resume.empty() && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw wsr::FileError("cannot write loss log: " + log_path.string());
  if (!append) wsr::write_loss_csv_header(log);

  const std::uint64_t budget = trainer.budget();
  std::cerr << "training " << budget << " iterations on " << trainer.sampler().image_count() << " image(s), starting at "
            << trainer.state().iteration << '\n';
  trainer.run([&](const wsr::LossLogEntry& e) {
    wsr::write_loss_csv_row(log, e);
    if (a.log_every > 0 && (e.iter % a.log_every == 0 || e.iter == budget)) {
      std::cerr << "iter " << e.iter << "  l_d " << e.l_d << "  l_c " << e.l_c << "  l_a " << e.l_a << "  l_wavelet "
                << e.l_wavelet << "  l_total " << e.l_total << '\n';
    }
  });
  log.flush();
  const fs::path final_path = out_dir / "final.wsr";
  wsr::save_checkpoint(final_path, trainer.state());
  std::cerr << "wrote " << final_path.string() << '\n';
  return kExitOk;
}

int cmd_sr(const SrArgs& a) {
  if (!fs::exists(a.model)) throw wsr::FileError("model file not found: " + a.model);
  if (!fs::exists(a.in)) throw wsr::FileError("input image not found: " + a.in);
  const wsr::Generator gen = wsr::load_generator(a.model);
  const wsr::Tensor lr = wsr::to_tensor(wsr::load_image(a.in));
  const wsr::Tensor sr = wsr::sr_reconstruct(lr, gen);
  wsr::save_image(a.out, wsr::to_image(sr));
  std::cerr << lr.shape().w << "x" << lr.shape().h << " -> " << sr.shape().w << "x" << sr.shape().h << '\n';
  return kExitOk;
}

int cmd_eval(const EvalArgs& a) {
  wsr::MetricConfig mc;
  if (a.mode == "y") {
    mc.mode = wsr::ColorMode::y;
  } else if (a.mode == "rgb") {
    mc.mode = wsr::ColorMode::rgb;
  } else {
    std::cerr << "wsr eval: --mode must be y or rgb\n";
    return kExitUsage;
  }
  mc.border = a.border;
  const wsr::MetricReport report = wsr::evaluate_dataset(a.sr, a.hr, mc);
  wsr::print_table(std::cout, report);
  if (!a.csv.empty()) {
    std::ofstream os(a.csv);
    if (!os) throw wsr::FileError("cannot write report: " + a.csv);
    wsr::write_csv(os, report);
  }
  return kExitOk;
}

int cmd_wpt(const WptArgs& a) {
  const wsr::Tensor image = wsr::to_tensor(wsr::load_image(a.in));
  wsr::Tensor shown;
  std::size_t color = 0;
  if (a.channel == "y") {
    const wsr::Plane y = wsr::to_luma(image);
    shown = wsr::Tensor({1, 1, y.h, y.w}, y.v);
  } else if (a.channel == "r" || a.channel == "g" || a.channel == "b") {
    shown = image;
    color = a.channel == "r" ? 0 : a.channel == "g" ? 1 : 2;
  } else {
    std::cerr << "wsr wpt: --channel must be y, r, g or b\n";
    return kExitUsage;
  }
  const wsr::SubbandSet bands = wsr::wpt2(shown);
  wsr::save_image(a.out, wsr::plane_to_image(wsr::tile_bands(bands, 0, color)));

  if (!a.inverse.empty()) {
    const wsr::Tensor recon = wsr::iwpt2(wsr::wpt2(image));
    double max_err = 0.0;
    for (std::size_t i = 0; i < image.numel(); ++i) max_err = std::max(max_err, std::abs(recon[i] - image[i]));
    fs::path target = a.inverse;
    if (fs::is_directory(target)) target /= "reconstruction.png";
    wsr::save_image(target, wsr::to_image(recon));
    std::cout << "max reconstruction error: " << max_err << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet-domain super-resolution GAN (x4)", "wsr"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a generator/discriminator pair on a folder of HR images");
  train->add_option("--config", ta.config_path, "Config file (key = value lines)");
  train->add_option("--data", ta.data, "Directory of HR training images (PNG/PPM)");
  train->add_option("--out", ta.out, "Output directory for checkpoints and loss.csv");
  train->add_option("--iters", ta.iters, "Iteration budget (0 = use --epochs)");
  train->add_option("--epochs", ta.epochs, "Epoch budget, used when the iteration budget is 0");
  train->add_option("--seed", ta.seed, "Seed for initialization and crop sampling");
  train->add_option("--lr", ta.lr, "Adam learning rate");
  train->add_option("--batch", ta.batch, "Crops per batch");
  train->add_option("--crop", ta.crop, "HR crop size (multiple of 4, >= 16)");
  train->add_option("--features", ta.features, "Generator feature maps F");
  train->add_option("--blocks", ta.blocks, "Generator residual blocks B");
  train->add_option("--input", ta.input_mode, "Generator input: pixels | wavelet");
  train->add_option("--checkpoint-every", ta.checkpoint_every, "Checkpoint interval in iterations (0 = final only)");
  train->add_option("--resume", ta.resume, "Continue from a training checkpoint");
  train->add_option("--log-every", ta.log_every, "Print losses every N iterations (0 = quiet)");
  train->add_flag("--no-adv", ta.no_adv, "Drop the adversarial term from the generator update");
  train->add_flag("--audit", ta.audit, "Check per-step parameter ownership and target band counts");

  SrArgs sa;
  auto* sr = app.add_subcommand("sr", "Super-resolve one image by x4");
  sr->add_option("--model", sa.model, "Checkpoint holding generator parameters")->required();
  sr->add_option("--in", sa.in, "LR input image")->required();
  sr->add_option("--out", sa.out, "SR output image (.png or .ppm)")->required();

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Compare SR images against HR references");
  ev->add_option("--sr", ea.sr, "Directory of SR images")->required();
  ev->add_option("--hr", ea.hr, "Directory of HR images with matching names")->required();
  ev->add_option("--mode", ea.mode, "Color handling: y (BT.601 luma, border crop) | rgb");
  ev->add_option("--border", ea.border, "Border pixels cropped in y mode");
  ev->add_option("--csv", ea.csv, "Write the report as CSV");

  WptArgs wa;
  auto* wpt = app.add_subcommand("wpt", "Dump the 16 packet sub-bands as a 4x4 tiled image");
  wpt->add_option("--in", wa.in, "Input image (extents divisible by 4)")->required();
  wpt->add_option("--out", wa.out, "Tiled output image")->required();
  wpt->add_option("--channel", wa.channel, "Channel to show: y | r | g | b");
  wpt->add_option("--inverse", wa.inverse, "Reconstruct, write the result here, report the max error");

  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(ta);
    if (*sr) return cmd_sr(sa);
    if (*ev) return cmd_eval(ea);
    if (*wpt) return cmd_wpt(wa);
    if (*version) {
      std::cout << "wsr " << WSR_VERSION << '\n';
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "wsr: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
