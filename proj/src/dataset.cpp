#include "wsr/dataset.hpp"

#include <algorithm>
#include <random>

#include "wsr/error.hpp"
#include "wsr/image_io.hpp"
#include "wsr/resize.hpp"

namespace wsr {

LrHrPair make_lr_hr_pair(const Tensor& hr) {
  const Shape& s = hr.shape();
  if (s.h % kScale != 0 || s.w % kScale != 0 || s.h == 0 || s.w == 0) {
    throw DimensionError("make_lr_hr_pair: HR extent " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " is not divisible by 4");
  }
  return {bicubic_resize(hr, s.h / kScale, s.w / kScale), hr};
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw FileError("dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  const Shape& s = image.shape();
  if (top + h > s.h || left + w > s.w) {
    throw DimensionError("crop: window exceeds image " + to_string(s));
  }
  Tensor out({s.n, s.c, h, w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        std::copy_n(image.plane(n, c) + (top + y) * s.w + left, w, out.plane(n, c) + y * w);
      }
    }
  }
  return out;
}

CropSampler::CropSampler(std::vector<Tensor> images, std::size_t crop_size, std::uint64_t seed)
    : images_(std::move(images)), crop_(crop_size), seed_(seed) {
  if (images_.empty()) throw ConfigError("dataset is empty");
  if (crop_ == 0 || crop_ % kScale != 0) {
    throw ConfigError("crop_size " + std::to_string(crop_) + " must be a positive multiple of 4");
  }
  for (std::size_t i = 0; i < images_.size(); ++i) {
    const Shape& s = images_[i].shape();
    if (s.n != 1 || s.c != 3) throw DimensionError("dataset image " + std::to_string(i) + " is not RGB: " + to_string(s));
    if (s.h < crop_ || s.w < crop_) {
      const std::string name = i < names_.size() ? names_[i] : "#" + std::to_string(i);
      throw DimensionError("dataset image " + name + " (" + std::to_string(s.w) + "x" + std::to_string(s.h) +
                           ") is smaller than crop_size " + std::to_string(crop_));
    }
  }
}

CropSampler CropSampler::from_directory(const std::filesystem::path& dir, std::size_t crop_size,
                                        std::uint64_t seed) {
  const auto files = list_images(dir);
  if (files.empty()) throw ConfigError("dataset directory has no PNG/PPM images: " + dir.string());
  std::vector<Tensor> images;
  for (const auto& f : files) {
    Tensor t = to_tensor(load_image(f));
    if (t.shape().h < crop_size || t.shape().w < crop_size) {
      throw DimensionError("dataset image " + f.string() + " is smaller than crop_size " + std::to_string(crop_size));
    }
    images.push_back(std::move(t));
  }
  CropSampler s(std::move(images), crop_size, seed);
  for (const auto& f : files) s.names_.push_back(f.filename().string());
  return s;
}

std::vector<CropLocation> CropSampler::locations(std::uint64_t batch_index, std::size_t batch_size) const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(batch_index), static_cast<std::uint32_t>(batch_index >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<CropLocation> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, images_.size() - 1);
    const std::size_t img = pick(rng);
    const Shape& s = images_[img].shape();
    std::uniform_int_distribution<std::size_t> row(0, s.h - crop_);
    std::uniform_int_distribution<std::size_t> col(0, s.w - crop_);
    const std::size_t top = row(rng);
    const std::size_t left = col(rng);
    out.push_back({img, top, left});
  }
  return out;
}

LrHrPair CropSampler::batch(std::uint64_t batch_index, std::size_t batch_size) const {
  std::vector<Tensor> crops;
  for (const CropLocation& loc : locations(batch_index, batch_size)) {
    crops.push_back(crop(images_[loc.image], loc.top, loc.left, crop_, crop_));
  }
  return make_lr_hr_pair(stack(crops));
}

}  // namespace wsr
