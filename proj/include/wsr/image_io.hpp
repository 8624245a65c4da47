#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wsr/plane.hpp"
#include "wsr/tensor.hpp"

namespace wsr {

// 8-bit RGB image, row-major, 3 bytes per pixel.
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  ImageBuffer() = default;
  ImageBuffer(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}
  bool operator==(const ImageBuffer&) const = default;
};

// Reads binary PPM (P6, maxval 255) or PNG (8/16-bit RGB or RGBA; alpha is
// dropped). Grayscale PNG is rejected with "unsupported color type".
ImageBuffer load_image(const std::filesystem::path& path);
// Format chosen by extension: .png or .ppm.
void save_image(const std::filesystem::path& path, const ImageBuffer& image);

// [1, 3, h, w] with values v / 255.
Tensor to_tensor(const ImageBuffer& image);
// Batch item `n` of a 3-channel tensor, round(v * 255) clamped to [0, 255].
ImageBuffer to_image(const Tensor& t, std::size_t n = 0);
// Gray plane replicated into RGB, same quantization as to_image.
ImageBuffer plane_to_image(const Plane& p);

}  // namespace wsr
