// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace listenhead {

/// Row-major grayscale image with intensities clamped to [0, 255].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(std::size_t height, std::size_t width, double fill = 0.0);
  GrayImage(std::size_t height, std::size_t width, std::vector<double> pixels);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  double at(std::size_t y, std::size_t x) const { return pixels_[y * width_ + x]; }
  void set(std::size_t y, std::size_t x, double v);
  const std::vector<double>& pixels() const { return pixels_; }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> pixels_;
};

/// ITU-R BT.601 luma.
double bt601_luma(double r, double g, double b);

/// Reads an 8-bit gray, gray+alpha, RGB or RGBA PNG; color is converted to luma.
GrayImage load_png(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG (pixels rounded).
void save_png(const std::filesystem::path& path, const GrayImage& image);

/// Sorted frame files (frame_000001.png, ...) in a directory.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

/// Separable Gaussian blur with edge replication; sigma 0 returns a copy.
GrayImage gaussian_blur(const GrayImage& image, double sigma);

}  // namespace listenhead
