// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>

#include "listenhead/image.hpp"
#include "listenhead/model.hpp"

namespace listenhead {

/// Mean absolute coefficient error per group, multiplied by 100.
struct FeatureDistanceReport {
  double angle = 0.0;
  double expression = 0.0;
  double translation = 0.0;
};

FeatureDistanceReport feature_distance(const CoeffSequence& pred, const CoeffSequence& gt);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE); identical images give kPsnrIdentical.
double psnr(const GrayImage& a, const GrayImage& b, double peak = 255.0);

/// Mean SSIM over all valid placements of an 11x11 Gaussian window
/// (sigma 1.5), C1 = (0.01*255)^2, C2 = (0.03*255)^2. Images >= 8x8.
double ssim(const GrayImage& a, const GrayImage& b);

struct CpbdConfig {
  double beta = 3.6;
  double jnb_width_low_contrast = 5.0;   // local contrast <= contrast_split
  double jnb_width_high_contrast = 3.0;
  double contrast_split = 50.0;
  double detection_threshold = 0.63;
  // Edge pixel iff squared Sobel magnitude exceeds this multiple of its mean.
  double edge_threshold_factor = 4.0;
};

void validate(const CpbdConfig& config);

struct CpbdResult {
  double value = 1.0;
  std::size_t edge_pixels = 0;
  bool no_edges = false;
};

/// Cumulative probability of blur detection: the fraction of Sobel edge
/// pixels whose edge width w gives 1 - exp(-(w / w_jnb)^beta) below the
/// detection threshold. Intensities are quantised to 8-bit levels before the
/// width walk. Images >= 16x16. No edges yields 1.0 with no_edges set.
CpbdResult cpbd(const GrayImage& image, const CpbdConfig& config = {});

/// Width (in pixels, along the dominant gradient axis) and contrast of the
/// edge through (y, x) on a quantised image.
struct EdgeProfile {
  double width = 0.0;
  double contrast = 0.0;
};

EdgeProfile measure_edge(const GrayImage& quantized, std::size_t y, std::size_t x, bool horizontal,
                         bool rising);

/// Video-level metrics averaged over paired frames.
struct FrameMetrics {
  double ssim = 0.0;
  double psnr = 0.0;
  double cpbd = 0.0;
  std::size_t frames = 0;
};

FrameMetrics evaluate_frames(const std::filesystem::path& pred_dir,
                             const std::filesystem::path& gt_dir, const CpbdConfig& cpbd_config = {});

struct EvalReport {
  FeatureDistanceReport distance;
  std::optional<FrameMetrics> frames;
};

/// JSON object with keys angle, exp, trans, ssim, psnr, cpbd, fid, csim.
/// Metrics that were not computed (and fid/csim, always) are "n/a"; an
/// infinite PSNR is "inf".
std::string to_json(const EvalReport& report);

}  // namespace listenhead
