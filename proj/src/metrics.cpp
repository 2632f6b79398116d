// SPDX-License-Identifier: Apache-2.0
#include "listenhead/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "listenhead/error.hpp"

namespace listenhead {

FeatureDistanceReport feature_distance(const CoeffSequence& pred, const CoeffSequence& gt) {
  if (pred.dims != gt.dims) throw ContractError("feature_distance: coefficient dims differ");
  if (pred.frames() != gt.frames())
    throw ContractError("feature_distance: " + std::to_string(pred.frames()) + " vs " +
                        std::to_string(gt.frames()) + " frames");
  if (pred.frames() == 0) throw ContractError("feature_distance: empty sequences");
  const CoeffDims& d = pred.dims;
  const auto group = [&](std::size_t begin, std::size_t end) {
    double acc = 0.0;
    for (std::size_t t = 0; t < pred.frames(); ++t)
      for (std::size_t j = begin; j < end; ++j) acc += std::abs(pred.values.at(t, j) - gt.values.at(t, j));
    return 100.0 * acc / static_cast<double>(pred.frames() * (end - begin));
  };
  FeatureDistanceReport r;
  r.angle = group(d.angle_begin(), d.translation_begin());
  r.translation = group(d.translation_begin(), d.expression_begin());
  r.expression = group(d.expression_begin(), d.total());
  return r;
}

namespace {

void require_same_dims(const GrayImage& a, const GrayImage& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width())
    throw ContractError(std::string(what) + ": image dimensions differ");
}

}  // namespace

double psnr(const GrayImage& a, const GrayImage& b, double peak) {
  require_same_dims(a, b, "psnr");
  if (a.pixels().empty()) throw ContractError("psnr: empty images");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    const double d = a.pixels()[i] - b.pixels()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.pixels().size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const GrayImage& a, const GrayImage& b) {
  require_same_dims(a, b, "ssim");
  if (a.height() < 8 || a.width() < 8) throw ContractError("ssim: images must be at least 8x8");
  constexpr int kRadius = 5;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
  constexpr double kC2 = (0.03 * 255) * (0.03 * 255);

  // Window clipped to the image when it is smaller than 11x11.
  const int win_h = std::min<int>(2 * kRadius + 1, static_cast<int>(a.height()));
  const int win_w = std::min<int>(2 * kRadius + 1, static_cast<int>(a.width()));
  std::vector<double> window(static_cast<std::size_t>(win_h * win_w));
  double norm = 0.0;
  for (int y = 0; y < win_h; ++y)
    for (int x = 0; x < win_w; ++x) {
      const double dy = y - (win_h - 1) / 2.0, dx = x - (win_w - 1) / 2.0;
      norm += window[y * win_w + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
    }
  for (double& w : window) w /= norm;

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + win_h <= a.height(); ++y0)
    for (std::size_t x0 = 0; x0 + win_w <= a.width(); ++x0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = 0; y < win_h; ++y)
        for (int x = 0; x < win_w; ++x) {
          const double w = window[y * win_w + x];
          const double pa = a.at(y0 + y, x0 + x), pb = b.at(y0 + y, x0 + x);
          ma += w * pa;
          mb += w * pb;
          saa += w * pa * pa;
          sbb += w * pb * pb;
          sab += w * pa * pb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
      ++count;
    }
  return total / static_cast<double>(count);
}

EdgeProfile measure_edge(const GrayImage& q, std::size_t y, std::size_t x, bool horizontal,
                         bool rising) {
  const long limit = static_cast<long>(horizontal ? q.width() : q.height());
  const long start = static_cast<long>(horizontal ? x : y);
  const auto value = [&](long i) {
    return horizontal ? q.at(y, static_cast<std::size_t>(i)) : q.at(static_cast<std::size_t>(i), x);
  };
  // Walk to the local extrema on either side of the edge pixel.
  const auto ahead = [&](double next, double cur) { return rising ? next > cur : next < cur; };
  long hi = start;
  while (hi + 1 < limit && ahead(value(hi + 1), value(hi))) ++hi;
  long lo = start;
  while (lo - 1 >= 0 && ahead(value(lo), value(lo - 1))) --lo;
  return {static_cast<double>(hi - lo), std::abs(value(hi) - value(lo))};
}

void validate(const CpbdConfig& c) {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(c.beta)) throw ContractError("cpbd.beta must be > 0");
  if (!positive(c.jnb_width_low_contrast) || !positive(c.jnb_width_high_contrast))
    throw ContractError("cpbd JNB widths must be > 0");
  if (!(std::isfinite(c.contrast_split) && c.contrast_split >= 0.0))
    throw ContractError("cpbd.contrast_split must be >= 0");
  if (!(c.detection_threshold > 0.0 && c.detection_threshold < 1.0))
    throw ContractError("cpbd.detection_threshold must lie in (0, 1)");
  if (!positive(c.edge_threshold_factor)) throw ContractError("cpbd.edge_threshold_factor must be > 0");
}

CpbdResult cpbd(const GrayImage& image, const CpbdConfig& config) {
  validate(config);
  if (image.height() < 16 || image.width() < 16)
    throw ContractError("cpbd: image must be at least 16x16");
  const std::size_t h = image.height(), w = image.width();
  std::vector<double> levels(image.pixels());
  for (double& p : levels) p = std::round(p);
  const GrayImage q(h, w, std::move(levels));

  std::vector<double> gx(h * w, 0.0), gy(h * w, 0.0), mag2(h * w, 0.0);
  double mean_mag2 = 0.0;
  for (std::size_t y = 1; y + 1 < h; ++y)
    for (std::size_t x = 1; x + 1 < w; ++x) {
      const auto p = [&](int dy, int dx) { return q.at(y + dy, x + dx); };
      const double sx = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
      const double sy = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
      gx[y * w + x] = sx;
      gy[y * w + x] = sy;
      mag2[y * w + x] = sx * sx + sy * sy;
      mean_mag2 += mag2[y * w + x];
    }
  mean_mag2 /= static_cast<double>((h - 2) * (w - 2));
  const double cutoff = config.edge_threshold_factor * mean_mag2;

  CpbdResult result;
  std::size_t sharp = 0;
  for (std::size_t y = 1; y + 1 < h; ++y)
    for (std::size_t x = 1; x + 1 < w; ++x) {
      const std::size_t i = y * w + x;
      if (mag2[i] <= cutoff || mag2[i] == 0.0) continue;
      const bool horizontal = std::abs(gx[i]) >= std::abs(gy[i]);
      const bool rising = horizontal ? gx[i] > 0 : gy[i] > 0;
      const EdgeProfile edge = measure_edge(q, y, x, horizontal, rising);
      const double jnb = edge.contrast <= config.contrast_split ? config.jnb_width_low_contrast
                                                                : config.jnb_width_high_contrast;
      const double prob = 1.0 - std::exp(-std::pow(edge.width / jnb, config.beta));
      ++result.edge_pixels;
      if (prob < config.detection_threshold) ++sharp;
    }
  if (result.edge_pixels == 0) {
    result.no_edges = true;
    result.value = 1.0;
  } else {
    result.value = static_cast<double>(sharp) / static_cast<double>(result.edge_pixels);
  }
  return result;
}

FrameMetrics evaluate_frames(const std::filesystem::path& pred_dir,
                             const std::filesystem::path& gt_dir, const CpbdConfig& cpbd_config) {
  validate(cpbd_config);
  const auto pred = list_frames(pred_dir);
  const auto gt = list_frames(gt_dir);
  if (pred.empty()) throw DataError("no frame_*.png files in " + pred_dir.string());
  if (pred.size() != gt.size())
    throw DataError("frame count mismatch: " + std::to_string(pred.size()) + " predicted vs " +
                    std::to_string(gt.size()) + " ground-truth frames");
  FrameMetrics m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const GrayImage a = load_png(pred[i]);
    const GrayImage b = load_png(gt[i]);
    if (a.height() != b.height() || a.width() != b.width())
      throw DataError("frame size mismatch between " + pred[i].string() + " and " + gt[i].string());
    m.ssim += ssim(a, b);
    m.psnr += psnr(a, b);
    m.cpbd += cpbd(a, cpbd_config).value;
  }
  m.frames = pred.size();
  const double n = static_cast<double>(m.frames);
  m.ssim /= n;
  m.psnr /= n;
  m.cpbd /= n;
  return m;
}

std::string to_json(const EvalReport& report) {
  using nlohmann::json;
  const auto number = [](double v) -> json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  json j;
  j["angle"] = report.distance.angle;
  j["exp"] = report.distance.expression;
  j["trans"] = report.distance.translation;
  if (report.frames) {
    j["ssim"] = report.frames->ssim;
    j["psnr"] = number(report.frames->psnr);
    j["cpbd"] = report.frames->cpbd;
  } else {
    j["ssim"] = j["psnr"] = j["cpbd"] = "n/a";
  }
  j["fid"] = "n/a";
  j["csim"] = "n/a";
  return j.dump();
}

}  // namespace listenhead
