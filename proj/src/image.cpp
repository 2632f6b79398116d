// SPDX-License-Identifier: Apache-2.0
#include "listenhead/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <regex>

#include "listenhead/error.hpp"

namespace listenhead {

GrayImage::GrayImage(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), pixels_(height * width, std::clamp(fill, 0.0, 255.0)) {}

GrayImage::GrayImage(std::size_t height, std::size_t width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (pixels_.size() != height * width)
    throw ContractError("GrayImage: pixel count does not match " + std::to_string(height) + "x" +
                        std::to_string(width));
  for (double& p : pixels_) {
    if (!std::isfinite(p)) throw ContractError("GrayImage: non-finite pixel");
    p = std::clamp(p, 0.0, 255.0);
  }
}

void GrayImage::set(std::size_t y, std::size_t x, double v) {
  pixels_[y * width_ + x] = std::clamp(v, 0.0, 255.0);
}

double bt601_luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

GrayImage load_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("cannot open image: " + path.string());
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<unsigned char> raw(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raw.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path.string() + ": " + msg);
  }
  const std::size_t width = img.width, height = img.height;
  std::vector<double> pixels(width * height);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (color) {
      const unsigned char* p = raw.data() + 3 * i;
      pixels[i] = bt601_luma(p[0], p[1], p[2]);
    } else {
      pixels[i] = raw[i];
    }
  }
  return GrayImage(height, width, std::move(pixels));
}

void save_png(const std::filesystem::path& path, const GrayImage& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> raw(image.pixels().size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<unsigned char>(std::lround(image.pixels()[i]));
  if (!png_image_write_to_file(&img, path.c_str(), 0, raw.data(), 0, nullptr))
    throw DataError("cannot write image " + path.string() + ": " + img.message);
}

std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a frame directory: " + dir.string());
  static const std::regex pattern(R"(frame_\d+\.png)");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && std::regex_match(entry.path().filename().string(), pattern))
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

GrayImage gaussian_blur(const GrayImage& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i)
    norm += kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  for (double& k : kernel) k /= norm;

  const auto h = static_cast<long>(image.height()), w = static_cast<long>(image.width());
  std::vector<double> tmp(image.pixels().size()), out(image.pixels().size());
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * image.at(y, std::clamp(x + i, 0L, w - 1));
      tmp[y * w + x] = acc;
    }
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * tmp[std::clamp(y + i, 0L, h - 1) * w + x];
      out[y * w + x] = acc;
    }
  return GrayImage(image.height(), image.width(), std::move(out));
}

}  // namespace listenhead
