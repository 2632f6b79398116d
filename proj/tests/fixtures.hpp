// SPDX-License-Identifier: Apache-2.0
// Model configurations and random instances shared by unit and acceptance tests.
#pragma once

#include <cmath>

#include "listenhead/acoustic.hpp"
#include "listenhead/image.hpp"
#include "listenhead/model.hpp"
#include "listenhead/rng.hpp"
#include "support.hpp"

namespace testing {

// residual 4, skip 4, dilations [1, 2], LSTM 5, four expression coefficients.
inline listenhead::ModelConfig tiny_config(std::uint64_t seed = 0) {
  listenhead::ModelConfig c;
  c.residual_channels = 4;
  c.skip_channels = 4;
  c.kernel_size = 2;
  c.dilations = {1, 2};
  c.lstm_hidden = 5;
  c.coeff_dims.expression = 4;
  c.seed = seed;
  return c;
}

// Every tensor, biases included, uniform in +-bound, so no unit sits at zero.
inline void randomize(listenhead::ListenerHeadModel& model, listenhead::Rng& rng,
                      double bound = 0.6) {
  listenhead::visit_parameters(
      [&](const std::string&, listenhead::Tensor& t) { t = random_tensor(rng, t.shape(), bound); },
      model.params);
}

inline listenhead::AcousticFeatures random_features(listenhead::Rng& rng, std::size_t steps) {
  return {random_tensor(rng, {steps, listenhead::kFeatureDim}, 2.0)};
}

inline listenhead::CoeffFrame random_frame(listenhead::Rng& rng, const listenhead::CoeffDims& dims) {
  std::vector<double> v(dims.total());
  for (double& x : v) x = rng.symmetric(0.5);
  return listenhead::CoeffFrame::from_flat(v, dims);
}

// Edge charts for blur sweeps. Dark left half, bright right half.
inline listenhead::GrayImage step_chart(std::size_t size = 64) {
  listenhead::GrayImage img(size, size, 40.0);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = size / 2; x < size; ++x) img.set(y, x, 210.0);
  return img;
}

// Dense charts such as checkerboards are avoided: once blurred, no Sobel
// response clears the mean-relative threshold and cpbd falls back to 1.0.
inline listenhead::GrayImage square_chart(std::size_t size = 64) {
  listenhead::GrayImage img(size, size, 200.0);
  for (std::size_t y = size / 4; y < 3 * size / 4; ++y)
    for (std::size_t x = size / 4; x < 3 * size / 4; ++x) img.set(y, x, 30.0);
  return img;
}

inline listenhead::GrayImage disk_chart(std::size_t size = 64) {
  listenhead::GrayImage img(size, size, 60.0);
  const double c = (double(size) - 1.0) / 2.0, r = double(size) / 3.0;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x)
      if (std::hypot(double(y) - c, double(x) - c) < r) img.set(y, x, 230.0);
  return img;
}

// Smooth multi-frequency pattern in [50, 200] standing in for natural texture.
inline listenhead::GrayImage texture_image(std::size_t h = 48, std::size_t w = 48) {
  listenhead::GrayImage img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      img.set(y, x, 125.0 + 40.0 * std::sin(0.31 * x + 0.7 * std::cos(0.13 * y)) +
                        25.0 * std::cos(0.57 * y - 0.21 * x) + 10.0 * std::sin(1.3 * x * y / 48.0));
  return img;
}

}  // namespace testing
