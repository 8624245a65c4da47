#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wsr/tensor.hpp"

namespace wsr {

inline constexpr std::size_t kScale = 4;

struct LrHrPair {
  Tensor lr;  // [n, 3, h/4, w/4]
  Tensor hr;  // [n, 3, h, w]
};

// lr = bicubic_resize(hr, h/4, w/4). Extents must be divisible by 4.
LrHrPair make_lr_hr_pair(const Tensor& hr);

// PNG and PPM files directly inside `dir`, sorted by filename.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

struct CropLocation {
  std::size_t image;
  std::size_t top;
  std::size_t left;
};

// Random HR crops from a fixed list of source images. The contents of batch k
// depend only on (seed, k), so batches can be produced in any order.
class CropSampler {
 public:
  CropSampler(std::vector<Tensor> images, std::size_t crop_size, std::uint64_t seed);
  static CropSampler from_directory(const std::filesystem::path& dir, std::size_t crop_size, std::uint64_t seed);

  std::size_t crop_size() const { return crop_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t image_count() const { return images_.size(); }

  std::vector<CropLocation> locations(std::uint64_t batch_index, std::size_t batch_size) const;
  // HR crops of batch k stacked into [batch_size, 3, crop, crop], with LR pairs.
  LrHrPair batch(std::uint64_t batch_index, std::size_t batch_size) const;

 private:
  std::vector<Tensor> images_;
  std::vector<std::string> names_;
  std::size_t crop_;
  std::uint64_t seed_;
};

Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t h, std::size_t w);

}  // namespace wsr
