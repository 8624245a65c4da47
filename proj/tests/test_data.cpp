#include <doctest.h>

#include <cmath>
#include <fstream>
#include <array>
#include <map>
#include <random>

#include "support.hpp"
#include "wsr/dataset.hpp"
#include "wsr/error.hpp"
#include "wsr/image_io.hpp"
#include "wsr/resize.hpp"

using namespace wsr;
namespace fs = std::filesystem;

namespace {

// 1x1 RGB white pixel, 2x2 8-bit grayscale, and 2x1 RGBA (10,20,30,40).
const std::vector<std::uint8_t> kWhitePng{
    0x89, 0x50, 0x4e, 0x47, 0xd,  0xa,  0x1a, 0xa,  0x0,  0x0,  0x0,  0xd,  0x49, 0x48, 0x44, 0x52, 0x0,  0x0,
    0x0,  0x1,  0x0,  0x0,  0x0,  0x1,  0x8,  0x2,  0x0,  0x0,  0x0,  0x90, 0x77, 0x53, 0xde, 0x0,  0x0,  0x0,
    0xc,  0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xf8, 0xff, 0xff, 0x3f, 0x0,  0x5,  0xfe, 0x2,  0xfe, 0xd,
    0xef, 0x46, 0xb8, 0x0,  0x0,  0x0,  0x0,  0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
const std::vector<std::uint8_t> kGrayPng{
    0x89, 0x50, 0x4e, 0x47, 0xd,  0xa,  0x1a, 0xa,  0x0,  0x0,  0x0,  0xd,  0x49, 0x48, 0x44, 0x52, 0x0,
    0x0,  0x0,  0x2,  0x0,  0x0,  0x0,  0x2,  0x8,  0x0,  0x0,  0x0,  0x0,  0x57, 0xdd, 0x52, 0xf8, 0x0,
    0x0,  0x0,  0xe,  0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x6c, 0x60, 0x60, 0x62, 0x60, 0x0,  0x0,
    0x2,  0x92, 0x0,  0x84, 0xf7, 0x7c, 0xa3, 0x58, 0x0,  0x0,  0x0,  0x0,  0x49, 0x45, 0x4e, 0x44, 0xae,
    0x42, 0x60, 0x82};
const std::vector<std::uint8_t> kRgbaPng{
    0x89, 0x50, 0x4e, 0x47, 0xd,  0xa,  0x1a, 0xa,  0x0,  0x0,  0x0,  0xd,  0x49, 0x48, 0x44, 0x52, 0x0,  0x0,
    0x0,  0x2,  0x0,  0x0,  0x0,  0x1,  0x8,  0x6,  0x0,  0x0,  0x0,  0xf4, 0x22, 0x7f, 0x8a, 0x0,  0x0,  0x0,
    0x11, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xe4, 0x12, 0x91, 0xd3, 0x60, 0x60, 0x60, 0x60, 0x0,  0x0,
    0x2,  0x6a, 0x0,  0x66, 0x83, 0x74, 0xe7, 0x14, 0x0,  0x0,  0x0,  0x0,  0x49, 0x45, 0x4e, 0x44, 0xae, 0x42,
    0x60, 0x82};

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ImageBuffer random_buffer(std::size_t w, std::size_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ImageBuffer b(w, h);
  for (auto& v : b.pixels) v = static_cast<std::uint8_t>(rng() & 0xff);
  return b;
}

// Keys cubic with a = -0.5, written out from its piecewise definition.
double keys(double x) {
  const double a = -0.5, t = std::abs(x);
  if (t < 1) return (a + 2) * t * t * t - (a + 3) * t * t + 1;
  if (t < 2) return a * t * t * t - 5 * a * t * t + 8 * a * t - 4 * a;
  return 0.0;
}

}  // namespace

TEST_CASE("ppm round trip preserves the pixel payload") {
  test::TempDir dir("ppm");
  const ImageBuffer b = random_buffer(7, 5, 61);
  save_image(dir.path() / "x.ppm", b);
  const ImageBuffer back = load_image(dir.path() / "x.ppm");
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.pixels == b.pixels);
  const auto bytes = read_bytes(dir.path() / "x.ppm");
  CHECK(std::equal(b.pixels.begin(), b.pixels.end(), bytes.end() - static_cast<long>(b.pixels.size()),
                   [](std::uint8_t p, char c) { return p == static_cast<std::uint8_t>(c); }));
}

TEST_CASE("png decode and round trip") {
  test::TempDir dir("png");
  write_bytes(dir.path() / "white.png", kWhitePng);
  const ImageBuffer w = load_image(dir.path() / "white.png");
  CHECK(w.width == 1);
  CHECK(w.height == 1);
  CHECK(w.pixels == std::vector<std::uint8_t>{255, 255, 255});

  write_bytes(dir.path() / "rgba.png", kRgbaPng);
  CHECK(load_image(dir.path() / "rgba.png").pixels == std::vector<std::uint8_t>{10, 20, 30, 10, 20, 30});

  write_bytes(dir.path() / "gray.png", kGrayPng);
  try {
    load_image(dir.path() / "gray.png");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("unsupported color type") != std::string::npos);
  }

  const ImageBuffer b = random_buffer(9, 4, 62);
  save_image(dir.path() / "r.png", b);
  CHECK(load_image(dir.path() / "r.png").pixels == b.pixels);
}

TEST_CASE("image loading errors name the file") {
  test::TempDir dir("bad");
  write_bytes(dir.path() / "junk.png", {1, 2, 3, 4, 5, 6, 7, 8});
  try {
    load_image(dir.path() / "junk.png");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("junk.png") != std::string::npos);
  }
  CHECK_THROWS_AS(load_image(dir.path() / "absent.png"), FileError);
  write_bytes(dir.path() / "short.ppm", {'P', '6', '\n', '4', ' ', '4', '\n', '2', '5', '5', '\n', 0, 0});
  CHECK_THROWS_AS(load_image(dir.path() / "short.ppm"), FormatError);
  CHECK_THROWS_AS(save_image(dir.path() / "x.bmp", random_buffer(2, 2, 1)), FormatError);
}

TEST_CASE("tensor and buffer conversions") {
  const ImageBuffer b = random_buffer(6, 3, 63);
  const Tensor t = to_tensor(b);
  CHECK(t.shape() == Shape{1, 3, 3, 6});
  CHECK(t.at(0, 1, 2, 4) == b.pixels[3 * (2 * 6 + 4) + 1] / 255.0);
  CHECK(to_image(t).pixels == b.pixels);

  Tensor out({1, 3, 1, 2}, {-0.2, 1.7, 0.5, 0.5, 0.1, 0.9});
  const ImageBuffer c = to_image(out);
  CHECK(c.pixels == std::vector<std::uint8_t>{0, 128, 26, 255, 128, 230});
}

TEST_CASE("keys kernel values") {
  CHECK(keys_cubic(0.0) == 1.0);
  CHECK(keys_cubic(1.0) == doctest::Approx(0.0));
  CHECK(keys_cubic(0.5) == doctest::Approx(0.5625));
  CHECK(keys_cubic(-1.5) == doctest::Approx(-0.0625));
  CHECK(keys_cubic(2.5) == 0.0);
}

TEST_CASE("bicubic resize: identity, constants, and errors") {
  const Tensor img = test::test_image(13, 9);
  const Tensor same = bicubic_resize(img, 13, 9);
  for (std::size_t i = 0; i < img.numel(); ++i) CHECK(std::abs(same[i] - img[i]) < 1e-9);
  const Tensor c({1, 3, 12, 20}, 0.42);
  for (auto [h, w] : {std::pair{3, 5}, std::pair{30, 7}, std::pair{1, 1}}) {
    const Tensor r = bicubic_resize(c, h, w);
    for (double v : r.values()) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));
  }
  CHECK_THROWS_AS(bicubic_resize(img, 0, 4), DimensionError);
}

TEST_CASE("bicubic 8x8 ramp down to 2x2 matches a direct weighted sum") {
  Tensor ramp({1, 1, 8, 8});
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) ramp.at(0, 0, y, x) = 0.1 * x + 0.03 * y;
  const Tensor out = bicubic_resize(ramp, 2, 2);
  // Scale 4: centers at 1.5 and 5.5, kernel stretched by 4, taps clamped to
  // the border, weights normalized.
  for (std::size_t oy = 0; oy < 2; ++oy) {
    for (std::size_t ox = 0; ox < 2; ++ox) {
      const double cy = oy * 4 + 1.5, cx = ox * 4 + 1.5;
      double num = 0, den = 0;
      for (int j = -8; j <= 16; ++j) {
        for (int l = -8; l <= 16; ++l) {
          const double w = keys((cy - j) / 4.0) * keys((cx - l) / 4.0);
          if (w == 0.0) continue;
          num += w * ramp.at(0, 0, std::clamp(j, 0, 7), std::clamp(l, 0, 7));
          den += w;
        }
      }
      CHECK(out.at(0, 0, oy, ox) == doctest::Approx(num / den).epsilon(1e-12));
    }
  }
}

TEST_CASE("lr/hr pairs") {
  const Tensor hr = test::test_image(88, 88);
  const LrHrPair p = make_lr_hr_pair(hr);
  CHECK(p.lr.shape() == Shape{1, 3, 22, 22});
  CHECK(p.hr.values() == hr.values());
  CHECK(make_lr_hr_pair(hr).lr.values() == p.lr.values());
  const LrHrPair flat = make_lr_hr_pair(Tensor({1, 3, 16, 16}, 0.3));
  for (double v : flat.lr.values()) CHECK(v == doctest::Approx(0.3));
  CHECK_THROWS_AS(make_lr_hr_pair(Tensor({1, 3, 18, 16})), DimensionError);
  CHECK(bicubic_resize(p.lr, 88, 88).shape() == hr.shape());
}

TEST_CASE("crop sampler batches") {
  std::vector<Tensor> imgs{test::test_image(100, 96, 0), test::test_image(90, 120, 1)};
  const CropSampler s(imgs, 88, 7);
  const CropSampler t(imgs, 88, 7);
  const LrHrPair b = s.batch(3, 16);
  CHECK(b.hr.shape() == Shape{16, 3, 88, 88});
  CHECK(b.lr.shape() == Shape{16, 3, 22, 22});
  CHECK(b.hr.values() == t.batch(3, 16).hr.values());
  CHECK(s.batch(4, 16).hr.values() != b.hr.values());

  const CropSampler one({test::test_image(100, 100)}, 88, 9);
  for (std::uint64_t k = 0; k < 50; ++k) {
    for (const auto& loc : one.locations(k, 4)) {
      CHECK(loc.image == 0);
      CHECK(loc.top <= 12);
      CHECK(loc.left <= 12);
    }
  }
  CHECK_THROWS_AS(CropSampler({}, 88, 1), ConfigError);
  CHECK_THROWS_AS(CropSampler({test::test_image(80, 100)}, 88, 1), DimensionError);
  CHECK_THROWS_AS(one.batch(0, 0), ConfigError);
}

TEST_CASE("crop corners and image choice are uniform") {
  const CropSampler s({test::test_image(100, 100)}, 88, 2024);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> cells;
  const std::size_t draws = 10000;
  for (std::uint64_t k = 0; k < draws / 10; ++k) {
    for (const auto& loc : s.locations(k, 10)) ++cells[{loc.top, loc.left}];
  }
  const double expected = static_cast<double>(draws) / 169.0;
  double chi2 = 0;
  for (std::size_t y = 0; y <= 12; ++y) {
    for (std::size_t x = 0; x <= 12; ++x) {
      const double o = static_cast<double>(cells[{y, x}]);
      chi2 += (o - expected) * (o - expected) / expected;
    }
  }
  CHECK(chi2 < 230.383);  // 99.9th percentile of chi-square with 168 dof

  std::vector<Tensor> four;
  for (int i = 0; i < 4; ++i) four.push_back(test::test_image(20, 20, i));
  const CropSampler m(four, 16, 5);
  std::array<double, 4> counts{};
  for (std::uint64_t k = 0; k < 1000; ++k) {
    for (const auto& loc : m.locations(k, 8)) ++counts[loc.image];
  }
  double chi_img = 0;
  for (double c : counts) chi_img += (c - 2000.0) * (c - 2000.0) / 2000.0;
  CHECK(chi_img < 16.266);  // 3 dof
}

TEST_CASE("dataset directory listing") {
  test::TempDir dir("list");
  save_image(dir.path() / "b.png", to_image(test::test_image(24, 24)));
  save_image(dir.path() / "a.ppm", to_image(test::test_image(24, 24, 1)));
  write_bytes(dir.path() / "notes.txt", {'x'});
  const auto files = list_images(dir.path());
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "a.ppm");
  CHECK(CropSampler::from_directory(dir.path(), 16, 1).image_count() == 2);
  try {
    CropSampler::from_directory(dir.path() / "missing", 16, 1);
    FAIL("expected FileError");
  } catch (const FileError& e) {
    CHECK(std::string(e.what()).find("missing") != std::string::npos);
  }
}
