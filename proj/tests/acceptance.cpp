// Acceptance checks. Prints one PASS/FAIL line per criterion; an optional
// argument selects a single criterion (1-8).

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "wsr/checkpoint.hpp"
#include "wsr/dataset.hpp"
#include "wsr/layers.hpp"
#include "wsr/loss.hpp"
#include "wsr/metrics.hpp"
#include "wsr/network.hpp"
#include "wsr/resize.hpp"
#include "wsr/tensor.hpp"
#include "wsr/trainer.hpp"
#include "wsr/wavelet.hpp"

using namespace wsr;
using test::grad_check;
using test::random_tensor;

namespace {

constexpr double kReconTol = 1e-10;
constexpr double kEnergyTol = 1e-10;
constexpr double kGradTol = 1e-4;
constexpr double kCompositeTol = 1e-3;
constexpr double kFdEps = 1e-5;
constexpr double kMetricTol = 1e-6;
constexpr double kPsnrExactTol = 1e-9;
constexpr double kLossTol = 1e-6;
constexpr double kCorpusSeconds = 30.0;
constexpr double kSmokeSeconds = 120.0;
constexpr double kSmokeLossRatio = 0.1;
constexpr double kSmokeMarginDb = 1.0;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Random images with extents that are multiples of 4, 1-2 items, 1-3 colors.
std::vector<Tensor> random_corpus(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> ext(1, 12), items(1, 2), colors(1, 3);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(random_tensor({items(rng), colors(rng), 4 * ext(rng), 4 * ext(rng)}, rng, 0.0, 1.0));
  }
  return out;
}

Outcome criterion_reconstruction() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto corpus = random_corpus(500, 101);
  double worst = 0.0;
  for (const auto& img : corpus) {
    const Tensor back = iwpt2(wpt2(img));
    for (std::size_t i = 0; i < img.numel(); ++i) worst = std::max(worst, std::abs(back[i] - img[i]));
  }
  const double secs = seconds_since(t0);
  o.detail << "max abs error " << worst << " over 500 images in " << secs << " s";
  o.require(worst < kReconTol, "error >= 1e-10");
  o.require(secs < kCorpusSeconds, "runtime >= 30 s");
  return o;
}

Outcome criterion_energy() {
  Outcome o;
  const auto corpus = random_corpus(500, 101);
  double worst = 0.0;
  for (const auto& img : corpus) {
    const double e_pixel = sum_squares(img);
    const double e_coeff = sum_squares(wpt2(img).coeffs());
    worst = std::max(worst, std::abs(e_pixel - e_coeff) / e_pixel);
  }
  o.detail << "max relative energy error " << worst;
  o.require(worst < kEnergyTol, "relative error >= 1e-10");
  return o;
}

// Gradient checks across every differentiable operation, each on fresh
// random inputs; tracks the worst relative error per group.
Outcome criterion_gradients() {
  Outcome o;
  std::mt19937_64 rng(303);
  double worst_layer = 0.0;
  std::string worst_name;
  std::size_t skipped = 0;
  auto track = [&](const char* name, const test::GradCheckResult& r) {
    skipped += r.skipped;
    if (r.max_rel >= worst_layer) {
      worst_layer = r.max_rel;
      worst_name = name;
    }
  };

  // conv2d over strides and paddings
  for (std::size_t stride : {1, 2}) {
    for (std::size_t pad : {0, 1}) {
      Tensor x = random_tensor({2, 3, 7, 6}, rng);
      Tensor k = random_tensor({4, 3, 3, 3}, rng);
      Tensor b = random_tensor({1, 1, 1, 4}, rng);
      const Tensor y0 = conv2d(x, k, b.data(), stride, pad);
      const Tensor w = random_tensor(y0.shape(), rng);
      const auto g = conv2d_backward(x, k, w, stride, pad, true);
      auto f = [&] { return test::dot(conv2d(x, k, b.data(), stride, pad), w); };
      track("conv2d input", grad_check(x, g.input, f, kFdEps));
      track("conv2d kernel", grad_check(k, g.kernel, f, kFdEps));
      track("conv2d bias", grad_check(b, Tensor::vector(g.bias), f, kFdEps));
    }
  }
  // rectifiers and pooling
  {
    Tensor x = test::random_signed_away_from_zero({2, 3, 4, 5}, rng);
    Tensor slope = random_tensor({1, 1, 1, 3}, rng, 0.05, 0.5);
    const Tensor w = random_tensor(x.shape(), rng);
    const auto g = prelu_backward(x, slope, w);
    auto f = [&] { return test::dot(prelu(x, slope), w); };
    track("prelu x", grad_check(x, g.x, f, kFdEps));
    track("prelu slope", grad_check(slope, g.slope, f, kFdEps));
    auto fl = [&] { return test::dot(leaky_relu(x, kDiscLeakySlope), w); };
    track("leaky_relu", grad_check(x, leaky_relu_backward(x, kDiscLeakySlope, w), fl, kFdEps));
    auto fr = [&] { return test::dot(relu(x), w); };
    track("relu", grad_check(x, relu_backward(x, w), fr, kFdEps));
    const Tensor wp = random_tensor({2, 3, 1, 1}, rng);
    auto fp = [&] { return test::dot(global_avg_pool(x), wp); };
    track("global_avg_pool", grad_check(x, global_avg_pool_backward(x.shape(), wp), fp, kFdEps));
  }
  // losses
  {
    Tensor sr = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
    const Tensor hr = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
    const FeatureExtractor ext = FeatureExtractor::random_conv();
    const auto lc = content_loss(sr, hr, ext);
    track("content_loss", grad_check(sr, lc.grad, [&] { return content_loss(sr, hr, ext).value; }, kFdEps));

    Tensor a = random_tensor({2, 32, 3, 3}, rng);
    const Tensor b = random_tensor({2, 32, 3, 3}, rng);
    std::array<double, 16> alpha{};
    for (auto& v : alpha) v = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    const auto lw = wavelet_loss(a, b, alpha);
    track("wavelet_loss", grad_check(a, lw.grad, [&] { return wavelet_loss(a, b, alpha).value; }, kFdEps));

    Tensor probs = random_tensor({1, 1, 1, 3}, rng, 0.1, 0.9);
    const auto la = adversarial_loss_g(probs.data());
    track("adversarial_loss_g", grad_check(probs, Tensor::vector(la.grad), [&] { return adversarial_loss_g(probs.data()).value; },
                     kFdEps));
    Tensor real = random_tensor({1, 1, 1, 3}, rng, 0.1, 0.9);
    Tensor fake = random_tensor({1, 1, 1, 3}, rng, 0.1, 0.9);
    const auto ld = discriminator_loss(real.data(), fake.data());
    auto fd = [&] { return discriminator_loss(real.data(), fake.data()).value; };
    track("discriminator_loss real", grad_check(real, Tensor::vector(ld.grad_real), fd, kFdEps));
    track("discriminator_loss fake", grad_check(fake, Tensor::vector(ld.grad_fake), fd, kFdEps));
  }
  // inverse packet transform
  {
    Tensor c = random_tensor({1, 32, 3, 2}, rng);
    const Tensor w = random_tensor({1, 2, 12, 8}, rng);
    auto f = [&] { return test::dot(iwpt2(SubbandSet(c)), w); };
    track("iwpt2", grad_check(c, iwpt2_backward(w), f, kFdEps));
  }
  // discriminator through the full stack, image and parameters
  {
    Discriminator d;
    init_params(d, 41);
    Tensor img = random_tensor({2, 3, 16, 16}, rng, 0.0, 1.0);
    const std::vector<double> wp{0.7, -1.3};
    auto f = [&] {
      const auto p = d.forward(img);
      return wp[0] * p[0] + wp[1] * p[1];
    };
    DiscriminatorTrace tr;
    d.forward(img, &tr);
    d.params().zero_grad();
    const Tensor gimg = d.backward(tr, wp, true);
    auto signs = [&] {
      DiscriminatorTrace t;
      d.forward(img, &t);
      std::vector<bool> s;
      for (const auto& z : t.conv_out) {
        for (double v : z.values()) s.push_back(v > 0);
      }
      return s;
    };
    track("discriminator image", grad_check(img, gimg, f, kFdEps, 200, 1e-6, signs));
    for (auto& p : d.params()) {
      track("discriminator params", grad_check(p.value, p.value.grad(), f, kFdEps, 20, 1e-6, signs));
    }
  }
  // generator parameters
  {
    Generator g({4, 2, GeneratorInput::pixels});
    init_params(g, 43);
    const Tensor lr = random_tensor({1, 3, 5, 4}, rng, 0.0, 1.0);
    const Tensor w = random_tensor({1, kCoeffChannels, 5, 4}, rng);
    GeneratorTrace tr;
    g.forward(lr, &tr);
    g.params().zero_grad();
    g.backward(tr, w);
    auto f = [&] { return test::dot(g.forward(lr), w); };
    auto signs = [&] {
      GeneratorTrace t;
      g.forward(lr, &t);
      std::vector<bool> s;
      for (double v : t.embed_pre.values()) s.push_back(v > 0);
      for (const auto& z : t.block_conv1) {
        for (double v : z.values()) s.push_back(v > 0);
      }
      return s;
    };
    for (auto& p : g.params()) {
      track("generator params", grad_check(p.value, p.value.grad(), f, kFdEps, 40, 1e-6, signs));
    }
  }

  // end-to-end composite loss on a tiny model
  double worst_e2e = 0.0;
  std::size_t checked = 0;
  {
    Generator g({8, 2, GeneratorInput::pixels});
    init_params(g, 5);
    Discriminator d;
    init_params(d, 6);
    const FeatureExtractor ext = FeatureExtractor::random_conv();
    const Tensor hr = test::test_image(32, 32);
    const Tensor lr = make_lr_hr_pair(hr).lr;
    const Tensor target = wpt2(hr).coeffs();
    const LossWeights weights;
    auto total = [&] {
      const Tensor coeffs = g.forward(lr);
      const Tensor sr = iwpt2(SubbandSet(coeffs));
      return generator_total_loss(sr, hr, d.forward(sr), coeffs, target, weights, ext).total;
    };
    GeneratorTrace gt;
    const Tensor coeffs = g.forward(lr, &gt);
    const Tensor sr = iwpt2(SubbandSet(coeffs));
    DiscriminatorTrace dt;
    const auto probs = d.forward(sr, &dt);
    const auto gl = generator_total_loss(sr, hr, probs, coeffs, target, weights, ext);
    Tensor grad_sr = gl.grad_sr;
    accumulate(grad_sr, d.backward(dt, gl.grad_d_fake, false));
    Tensor grad_coeffs = gl.grad_coeffs;
    accumulate(grad_coeffs, iwpt2_backward(grad_sr));
    g.params().zero_grad();
    g.backward(gt, grad_coeffs);
    for (auto& p : g.params()) {
      const auto r = grad_check(p.value, p.value.grad(), total, kFdEps, 24);
      worst_e2e = std::max(worst_e2e, r.max_rel);
      checked += r.checked;
    }
  }

  o.detail << "worst layer/loss relative error " << worst_layer << " (" << worst_name << ", " << skipped << " kink-straddling entries skipped)" << ", end-to-end " << worst_e2e << " over "
           << checked << " generator entries";
  o.require(worst_layer < kGradTol, "layer/loss gradient error >= 1e-4");
  o.require(worst_e2e < kCompositeTol, "end-to-end gradient error >= 1e-3");
  return o;
}

Plane noisy(const Plane& p, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  Plane out = p;
  for (auto& v : out.v) v += n(rng);
  return out;
}

Outcome criterion_metrics() {
  Outcome o;
  const Plane y = to_luma(test::test_image(64, 64));

  // identity maxima
  const double p_id = psnr(y, y), s_id = ssim(y, y), f_id = fsim(y, y), u_id = uiq(y, y);
  o.require(p_id == kPsnrCap, "identity PSNR != 99");
  o.require(std::abs(s_id - 1.0) < kMetricTol, "identity SSIM != 1");
  o.require(std::abs(f_id - 1.0) < kMetricTol, "identity FSIM != 1");
  o.require(std::abs(u_id - 1.0) < kMetricTol, "identity UIQ != 1");

  // uniform difference 0.1 on a unit range: MSE 0.01 -> 20 dB
  Plane shifted = y;
  for (auto& v : shifted.v) v += 0.1;
  const double p20 = psnr(y, shifted);
  o.require(std::abs(p20 - 20.0) < kPsnrExactTol, "uniform-diff PSNR != 20 dB");

  // constant images: only the luminance term survives
  const double ca = 0.5, cb = 0.25, c1 = (0.01 * 1.0) * (0.01 * 1.0);
  const Plane pa(32, 32, ca);
  const Plane pb(32, 32, cb);
  const double s_const = ssim(pa, pb);
  const double s_closed = (2 * ca * cb + c1) / (ca * ca + cb * cb + c1);
  o.require(std::abs(s_const - s_closed) < kMetricTol, "constant-image SSIM != closed form");

  // symmetry
  const Plane other = to_luma(test::test_image(64, 64, 3));
  double asym = 0.0;
  asym = std::max(asym, std::abs(psnr(y, other) - psnr(other, y)));
  asym = std::max(asym, std::abs(ssim(y, other) - ssim(other, y)));
  asym = std::max(asym, std::abs(fsim(y, other) - fsim(other, y)));
  asym = std::max(asym, std::abs(uiq(y, other) - uiq(other, y)));
  const auto h1 = lbp_histogram(y), h2 = lbp_histogram(other);
  asym = std::max(asym, std::abs(lbp_distance(h1, h2) - lbp_distance(h2, h1)));
  o.require(asym < 1e-12, "a similarity metric is asymmetric");

  // noise monotonicity
  double prev_p = 1e9, prev_s = 2.0;
  bool mono = true;
  std::ostringstream trail;
  for (double sigma : {0.01, 0.05, 0.1}) {
    const Plane n = noisy(y, sigma, 77);
    const double p = psnr(y, n), s = ssim(y, n);
    trail << " s" << sigma << ":" << p << "dB/" << s;
    mono = mono && p < prev_p && s < prev_s;
    prev_p = p;
    prev_s = s;
  }
  o.require(mono, "PSNR/SSIM not strictly decreasing with noise");

  o.detail << "identity psnr " << p_id << " ssim " << s_id << " fsim " << f_id << " uiq " << u_id << "; diff-0.1 psnr "
           << p20 << "; constant ssim " << s_const << " (closed form " << s_closed << "); max asymmetry " << asym
           << ";" << trail.str();
  return o;
}

Outcome criterion_loss_fixed_points() {
  Outcome o;
  const Tensor hr = test::test_image(16, 16);
  const Tensor coeffs = wpt2(hr).coeffs();
  const std::vector<double> d_one{1.0};
  const auto gl = generator_total_loss(hr, hr, d_one, coeffs, coeffs, LossWeights{}, FeatureExtractor::random_conv());
  const std::vector<double> d_half{0.5};
  const double la = adversarial_loss_g(d_half).value;
  const std::array<double, 16> ones{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  const double lw = wavelet_loss(coeffs, coeffs, ones).value;
  o.detail << "total at fixed point " << gl.total << ", l_A(0.5) " << la << ", l_wavelet(equal) " << lw;
  o.require(gl.total < kLossTol, "total loss >= 1e-6 at sr == hr, d = 1");
  o.require(std::abs(la - 0.693147) < kLossTol, "l_A(0.5) != 0.693147");
  o.require(lw == 0.0, "wavelet loss nonzero on equal coefficients");
  return o;
}

Outcome criterion_training_smoke() {
  Outcome o;
  TrainConfig c;
  c.model.features = 8;
  c.model.blocks = 2;
  c.weights.lambda_adv = 0.0;
  c.learning_rate = 2e-4;
  c.iterations = 300;
  c.batch_size = 1;
  c.crop_size = 32;
  c.checkpoint_interval = 0;
  c.seed = 1;
  const Tensor hr = test::test_image(32, 32);
  const auto t0 = std::chrono::steady_clock::now();
  Trainer trainer(fresh_state(c), CropSampler({hr}, c.crop_size, c.seed));
  const auto log = trainer.run();
  const double secs = seconds_since(t0);

  bool finite = true;
  for (const auto& e : log) {
    for (double v : {e.l_d, e.l_c, e.l_a, e.l_wavelet, e.l_total}) finite = finite && std::isfinite(v);
  }
  const double ratio = log.back().l_wavelet / log.front().l_wavelet;
  const Tensor lr = make_lr_hr_pair(hr).lr;
  const Tensor sr = sr_reconstruct(lr, trainer.state().gen);
  const Tensor bic = bicubic_resize(lr, 32, 32);
  const double p_sr = psnr(sr.values(), hr.values());
  const double p_bic = psnr(bic.values(), hr.values());
  o.detail << "wavelet loss " << log.front().l_wavelet << " -> " << log.back().l_wavelet << " (ratio " << ratio
           << "); SR PSNR " << p_sr << " dB vs bicubic " << p_bic << " dB; " << secs << " s";
  o.require(log.size() == 300 && finite, "non-finite loss components");
  o.require(ratio < kSmokeLossRatio, "wavelet loss not below 10% of initial");
  o.require(p_sr >= p_bic + kSmokeMarginDb, "SR PSNR below bicubic + 1 dB");
  o.require(secs < kSmokeSeconds, "runtime >= 2 min");
  return o;
}

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig c;
  c.model.features = 8;
  c.model.blocks = 1;
  c.batch_size = 2;
  c.crop_size = 16;
  c.iterations = 3;
  c.checkpoint_interval = 0;
  c.seed = seed;
  return c;
}

std::vector<Tensor> small_dataset() { return {test::test_image(24, 20, 1), test::test_image(20, 28, 2)}; }

std::vector<std::uint8_t> checkpoint_bytes(TrainingState& s, const std::filesystem::path& p) {
  save_checkpoint(p, s);
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome criterion_determinism() {
  Outcome o;
  test::TempDir dir("acc7");
  const TrainConfig c = small_config(11);

  Trainer a(fresh_state(c), CropSampler(small_dataset(), c.crop_size, c.seed));
  Trainer b(fresh_state(c), CropSampler(small_dataset(), c.crop_size, c.seed));
  a.run();
  b.run();
  const auto bytes_a = checkpoint_bytes(a.state(), dir.path() / "a.wsr");
  const auto bytes_b = checkpoint_bytes(b.state(), dir.path() / "b.wsr");
  o.require(bytes_a == bytes_b, "same seed gave different checkpoints");

  // k = 2 steps, checkpoint, one more step; versus resume from that file.
  TrainConfig ck = c;
  ck.iterations = 2;
  Trainer straight(fresh_state(ck), CropSampler(small_dataset(), c.crop_size, c.seed));
  straight.run();
  save_checkpoint(dir.path() / "k.wsr", straight.state());
  straight.step();
  Trainer resumed(load_checkpoint(dir.path() / "k.wsr"), CropSampler(small_dataset(), c.crop_size, c.seed));
  resumed.step();
  bool same = resumed.state().iteration == straight.state().iteration;
  for (std::size_t i = 0; i < straight.state().gen.params().size(); ++i) {
    same = same && straight.state().gen.params()[i].values() == resumed.state().gen.params()[i].values();
  }
  for (std::size_t i = 0; i < straight.state().disc.params().size(); ++i) {
    same = same && straight.state().disc.params()[i].values() == resumed.state().disc.params()[i].values();
  }
  const auto bytes_s = checkpoint_bytes(straight.state(), dir.path() / "s.wsr");
  const auto bytes_r = checkpoint_bytes(resumed.state(), dir.path() / "r.wsr");
  o.require(same, "resumed parameters differ from the straight run");
  o.require(bytes_s == bytes_r, "resumed checkpoint differs from the straight run");
  o.detail << "checkpoints " << bytes_a.size() << " bytes, identical: " << (bytes_a == bytes_b)
           << "; resume at k=2 then 1 step bit-identical: " << (same && bytes_s == bytes_r);
  return o;
}

Outcome criterion_bookkeeping() {
  Outcome o;
  TrainConfig c = small_config(12);
  c.audit = true;
  c.iterations = 4;
  Trainer t(fresh_state(c), CropSampler(small_dataset(), c.crop_size, c.seed));
  std::size_t steps = 0;
  bool ok = true;
  t.run([&](const LossLogEntry&) {
    const auto& a = t.last_audit();
    ++steps;
    ok = ok && a.has_value() && a->disc_step_left_generator_untouched && a->disc_step_updated_discriminator &&
         a->gen_step_left_discriminator_untouched && a->gen_step_updated_generator && a->target_colors == 3 &&
         a->target_bands_per_color == kBandsPerChannel;
  });
  bool inventory = true;
  for (const auto& p : t.state().gen.params()) inventory = inventory && p.name.starts_with("gen.");
  for (const auto& p : t.state().disc.params()) inventory = inventory && p.name.starts_with("disc.");
  o.detail << steps << " audited steps, ownership and 3 x 16 target bands confirmed: " << ok
           << "; disjoint parameter inventories: " << inventory;
  o.require(steps == 4 && ok, "audit failed");
  o.require(inventory, "parameter inventories overlap");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "wavelet perfect reconstruction", criterion_reconstruction},
      {2, "energy conservation", criterion_energy},
      {3, "gradient integrity", criterion_gradients},
      {4, "metric oracles", criterion_metrics},
      {5, "loss fixed points", criterion_loss_fixed_points},
      {6, "training smoke test", criterion_training_smoke},
      {7, "determinism and persistence", criterion_determinism},
      {8, "training bookkeeping audit", criterion_bookkeeping},
  };
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  bool all_pass = true;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    Outcome r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail << "threw: " << e.what();
    }
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (r.pass ? "PASS" : "FAIL") << " - "
              << r.detail.str() << std::endl;
    all_pass = all_pass && r.pass;
  }
  return all_pass ? EXIT_SUCCESS : EXIT_FAILURE;
}
