#include "wsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "wsr/error.hpp"

namespace wsr {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open image file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ImageBuffer decode_ppm(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::size_t pos = 2;
  auto fail = [&](const std::string& what) -> FormatError {
    return FormatError(path.string() + ": malformed PPM header (" + what + ")");
  };
  auto next_int = [&]() -> std::size_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw fail("expected integer");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
      if (v > (1u << 24)) throw fail("value too large");
    }
    return v;
  };
  const std::size_t w = next_int();
  const std::size_t h = next_int();
  const std::size_t maxval = next_int();
  if (maxval != 255) throw FormatError(path.string() + ": unsupported PPM maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw fail("missing separator");
  ++pos;
  if (w == 0 || h == 0) throw fail("zero extent");
  ImageBuffer img(w, h);
  if (bytes.size() - pos < img.pixels.size()) throw FormatError(path.string() + ": truncated PPM pixel data");
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), img.pixels.size(), img.pixels.begin());
  return img;
}

ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(path.string() + ": PNG decode failed: " + image.message);
  }
  if ((image.format & PNG_FORMAT_FLAG_COLOR) == 0) {
    png_image_free(&image);
    throw FormatError(path.string() + ": unsupported color type (grayscale PNG)");
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    throw FormatError(path.string() + ": PNG decode failed: " + image.message);
  }
  ImageBuffer img(image.width, image.height);
  for (std::size_t i = 0; i < img.width * img.height; ++i) {
    std::copy_n(&rgba[4 * i], 3, &img.pixels[3 * i]);
  }
  return img;
}

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  static const std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(png_sig, png_sig + 8, bytes.begin())) return decode_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes, path);
  throw FormatError(path.string() + ": unrecognized image format (expected PNG or binary PPM)");
}

void save_image(const std::filesystem::path& path, const ImageBuffer& img) {
  if (img.pixels.size() != img.width * img.height * 3 || img.width == 0 || img.height == 0) {
    throw DimensionError("save_image: buffer does not hold " + std::to_string(img.width) + "x" +
                         std::to_string(img.height) + " RGB pixels");
  }
  const std::string ext = lower_ext(path);
  if (ext == ".ppm") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write image file: " + path.string());
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw FileError("failed writing image file: " + path.string());
  } else if (ext == ".png") {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr)) {
      throw FileError("cannot write PNG " + path.string() + ": " + image.message);
    }
  } else {
    throw FormatError(path.string() + ": unsupported output extension '" + ext + "' (use .png or .ppm)");
  }
}

Tensor to_tensor(const ImageBuffer& img) {
  Tensor t({1, 3, img.height, img.width});
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) t.at(0, c, y, x) = img.pixels[(y * img.width + x) * 3 + c] / 255.0;
    }
  }
  return t;
}

namespace {

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::clamp(std::round(v * 255.0), 0.0, 255.0)); }

}  // namespace

ImageBuffer to_image(const Tensor& t, std::size_t n) {
  const Shape& s = t.shape();
  if (s.c != 3 || n >= s.n) throw DimensionError("to_image: need a 3-channel tensor, got " + to_string(s));
  ImageBuffer img(s.w, s.h);
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.pixels[(y * s.w + x) * 3 + c] = quantize(t.at(n, c, y, x));
    }
  }
  return img;
}

ImageBuffer plane_to_image(const Plane& p) {
  ImageBuffer img(p.w, p.h);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::uint8_t q = quantize(p.v[i]);
    img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = q;
  }
  return img;
}

}  // namespace wsr
