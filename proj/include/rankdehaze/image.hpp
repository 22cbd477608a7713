#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "rankdehaze/tensor.hpp"

namespace rankdehaze::image {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rgb = std::array<float, 3>;

/// Interleaved RGB image with values nominally in [0, 1].
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {0.f, 0.f, 0.f});

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t pixels() const { return static_cast<std::size_t>(width_) * height_; }
  [[nodiscard]] bool empty() const { return pixels() == 0; }

  float& at(int x, int y, int c) { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  float at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  [[nodiscard]] Rgb pixel(int x, int y) const { return {at(x, y, 0), at(x, y, 1), at(x, y, 2)}; }
  void set(int x, int y, const Rgb& v) {
    for (int c = 0; c < 3; ++c) at(x, y, c) = v[c];
  }

  [[nodiscard]] std::vector<float>& data() { return data_; }
  [[nodiscard]] const std::vector<float>& data() const { return data_; }

  /// Clamps every value into [0, 1].
  void clamp01();

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Single-channel float image (dark channel, transmission, guide, disparity).
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, float fill = 0.f);

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t pixels() const { return data_.size(); }

  float& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  [[nodiscard]] std::vector<float>& data() { return data_; }
  [[nodiscard]] const std::vector<float>& data() const { return data_; }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Per-pixel transmission t(x) in (0, 1].
using TransmissionMap = Plane;

bool same_size(const RgbImage& a, const RgbImage& b);
bool same_size(const RgbImage& a, const Plane& b);
bool same_size(const Plane& a, const Plane& b);

/// Rec.601 luma 0.299 R + 0.587 G + 0.114 B.
Plane luminance(const RgbImage& image);

/// Channel-major (3, size, size) tensor of the size x size window whose
/// top-left corner is (x0, y0). Coordinates outside the image are mirrored
/// (reflect-101: ... 2 1 | 0 1 2 ... | n-2 n-3 ...).
nn::Tensor<float> extract_patch(const RgbImage& image, int x0, int y0, int size);

int reflect_index(int i, int n);

// PNG (8- or 16-bit, gray/gray+alpha/RGB/RGBA in; alpha dropped) and binary
// PPM/PGM (P6/P5, maxval up to 65535) are recognised by file signature.
RgbImage read_image(const std::filesystem::path& path);
/// Reads a single-channel image (RGB input is converted with luminance()).
Plane read_plane(const std::filesystem::path& path);

/// Extension selects the format: .png, else binary PPM. 8 bits per channel.
void write_image(const std::filesystem::path& path, const RgbImage& image);
/// 16-bit grayscale PNG, values clamped to [0, 1].
void write_plane_png16(const std::filesystem::path& path, const Plane& plane);

bool is_image_file(const std::filesystem::path& path);

}  // namespace rankdehaze::image
