// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "listenhead/error.hpp"
#include "listenhead/image.hpp"
#include "listenhead/metrics.hpp"
#include "oracles.hpp"

using namespace listenhead;
using testing::random_tensor;

namespace {

const CoeffDims kDims{3, 3, 4};

std::vector<std::vector<double>> rows(const GrayImage& img) {
  std::vector<std::vector<double>> r(img.height(), std::vector<double>(img.width()));
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) r[y][x] = img.at(y, x);
  return r;
}

GrayImage noisy(const GrayImage& base, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  GrayImage out = base;
  for (std::size_t y = 0; y < base.height(); ++y)
    for (std::size_t x = 0; x < base.width(); ++x) out.set(y, x, base.at(y, x) + sigma * rng.normal());
  return out;
}

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.png", i);
  return buf;
}

}  // namespace

TEST_CASE("feature distance: scale, symmetry and triangle inequality") {
  Rng rng(1);
  const Tensor g = random_tensor(rng, {6, 10});
  const FeatureDistanceReport zero = feature_distance({kDims, g}, {kDims, g});
  CHECK(zero.angle == 0.0);
  CHECK(zero.expression == 0.0);
  CHECK(zero.translation == 0.0);

  std::vector<double> v = g.values();
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t j = 0; j < 3; ++j) v[t * 10 + j] += (j % 2 ? -0.05 : 0.05);
  const FeatureDistanceReport angle = feature_distance({kDims, Tensor(g.shape(), v)}, {kDims, g});
  CHECK(angle.angle == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(angle.expression == 0.0);
  CHECK(angle.translation == 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    const CoeffSequence a{kDims, random_tensor(rng, {4, 10})}, b{kDims, random_tensor(rng, {4, 10})},
        c{kDims, random_tensor(rng, {4, 10})};
    const auto ab = feature_distance(a, b), ba = feature_distance(b, a);
    const auto bc = feature_distance(b, c), ac = feature_distance(a, c);
    CHECK(ab.angle == ba.angle);
    CHECK(ab.expression == ba.expression);
    CHECK(ab.translation == ba.translation);
    CHECK(ac.angle <= ab.angle + bc.angle + 1e-12);
    CHECK(ac.expression <= ab.expression + bc.expression + 1e-12);
    CHECK(ac.translation <= ab.translation + bc.translation + 1e-12);
  }
  CHECK_THROWS_AS(feature_distance({kDims, g}, {kDims, random_tensor(rng, {5, 10})}), ContractError);
}

TEST_CASE("psnr closed forms and monotonicity") {
  const GrayImage a(16, 16, 100.0);
  CHECK(psnr(a, a) == kPsnrIdentical);
  CHECK(psnr(GrayImage(8, 8, 0.0), GrayImage(8, 8, 255.0)) == doctest::Approx(0.0));
  const double one = psnr(a, GrayImage(16, 16, 101.0));
  CHECK(std::abs(one - 20.0 * std::log10(255.0)) < 1e-9);
  CHECK(std::abs(one - 48.13) < 0.01);
  double last = one;
  for (double e : {2.0, 5.0, 20.0, 80.0}) {
    const double p = psnr(a, GrayImage(16, 16, 100.0 + e));
    CHECK(p < last);
    last = p;
  }
  CHECK_THROWS_AS(psnr(a, GrayImage(16, 15)), ContractError);
}

TEST_CASE("ssim closed forms") {
  const GrayImage tex = testing::texture_image();
  CHECK(ssim(tex, tex) == doctest::Approx(1.0).epsilon(1e-12));
  const double flat = ssim(GrayImage(16, 16, 100.0), GrayImage(16, 16, 110.0));
  const double expected = (2.0 * 100 * 110 + 6.5025) / (100.0 * 100 + 110.0 * 110 + 6.5025);
  CHECK(flat == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(flat - 0.99548) < 1e-4);
  CHECK_THROWS_AS(ssim(GrayImage(7, 20), GrayImage(7, 20)), ContractError);
  CHECK_THROWS_AS(ssim(tex, GrayImage(48, 47)), ContractError);
}

TEST_CASE("ssim matches the brute-force window sum and is symmetric") {
  const GrayImage tex = testing::texture_image(30, 26);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GrayImage other = noisy(tex, 5.0 + 10.0 * double(seed), seed);
    const double got = ssim(tex, other);
    CHECK(got == doctest::Approx(oracle::ssim(rows(tex), rows(other))).epsilon(1e-10));
    CHECK(got == doctest::Approx(ssim(other, tex)).epsilon(1e-14));
  }
}

TEST_CASE("ssim strictly decreases with noise power") {
  const GrayImage tex = testing::texture_image();
  double last = 1.0;
  for (double sigma : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    const double s = ssim(tex, noisy(tex, sigma, 42));
    CHECK(s < last);
    last = s;
  }
}

TEST_CASE("cpbd: constant image and blur sweeps on three charts") {
  const CpbdResult flat = cpbd(GrayImage(32, 32, 128.0));
  CHECK(flat.value == 1.0);
  CHECK(flat.no_edges);
  CHECK(flat.edge_pixels == 0);
  CHECK_THROWS_AS(cpbd(GrayImage(15, 40)), ContractError);

  for (const GrayImage& chart : {testing::step_chart(), testing::square_chart(), testing::disk_chart()}) {
    double last = 2.0;
    for (double sigma : {0.0, 1.0, 2.0, 4.0}) {
      const CpbdResult r = cpbd(gaussian_blur(chart, sigma));
      CAPTURE(sigma);
      CHECK_FALSE(r.no_edges);
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 1.0);
      CHECK(r.value <= last);
      last = r.value;
    }
  }
  const GrayImage step = testing::step_chart();
  CHECK(cpbd(step).value > cpbd(gaussian_blur(step, 3.0)).value);
}

TEST_CASE("gaussian blur keeps constants and sigma 0 copies") {
  const GrayImage c(20, 20, 77.0);
  const GrayImage b = gaussian_blur(c, 2.0);
  for (double v : b.pixels()) CHECK(v == doctest::Approx(77.0).epsilon(1e-12));
  const GrayImage tex = testing::texture_image();
  CHECK(gaussian_blur(tex, 0.0).pixels() == tex.pixels());
}

TEST_CASE("png round trip, frame listing and frame-level evaluation") {
  testing::TempDir dir("png");
  const GrayImage tex = testing::texture_image(32, 40);
  std::filesystem::create_directories(dir / "pred");
  std::filesystem::create_directories(dir / "gt");
  for (std::size_t i = 1; i <= 3; ++i) {
    save_png(dir / "gt" / frame_name(i), tex);
    save_png(dir / "pred" / frame_name(i), gaussian_blur(tex, double(i)));
  }
  const GrayImage back = load_png(dir / "gt" / frame_name(1));
  REQUIRE(back.height() == 32);
  REQUIRE(back.width() == 40);
  for (std::size_t k = 0; k < tex.pixels().size(); ++k)
    CHECK(back.pixels()[k] == std::round(tex.pixels()[k]));

  testing::spit(dir / "gt" / "notes.txt", "ignored");
  const auto frames = list_frames(dir / "gt");
  REQUIRE(frames.size() == 3);
  CHECK(frames[0].filename() == frame_name(1));
  CHECK(frames[2].filename() == frame_name(3));

  const FrameMetrics m = evaluate_frames(dir / "pred", dir / "gt");
  CHECK(m.frames == 3);
  double ssim_sum = 0.0, cpbd_sum = 0.0;
  for (std::size_t i = 1; i <= 3; ++i) {
    const GrayImage p = load_png(dir / "pred" / frame_name(i)), g = load_png(dir / "gt" / frame_name(i));
    ssim_sum += ssim(p, g);
    cpbd_sum += cpbd(p).value;
  }
  CHECK(m.ssim == doctest::Approx(ssim_sum / 3.0).epsilon(1e-12));
  CHECK(m.cpbd == doctest::Approx(cpbd_sum / 3.0).epsilon(1e-12));
  CHECK(std::isfinite(m.psnr));

  const FrameMetrics same = evaluate_frames(dir / "gt", dir / "gt");
  CHECK(same.psnr == kPsnrIdentical);
  CHECK(same.ssim == doctest::Approx(1.0));

  std::filesystem::remove(dir / "pred" / frame_name(3));
  CHECK_THROWS_AS(evaluate_frames(dir / "pred", dir / "gt"), DataError);
  CHECK_THROWS_AS(load_png(dir / "gt" / "notes.txt"), DataError);
}

TEST_CASE("report json carries exactly the metric keys") {
  EvalReport report;
  report.distance = {1.5, 2.5, 0.25};
  auto j = nlohmann::json::parse(to_json(report));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  CHECK(keys == std::vector<std::string>{"angle", "cpbd", "csim", "exp", "fid", "psnr", "ssim", "trans"});
  CHECK(j["angle"] == 1.5);
  CHECK(j["exp"] == 2.5);
  CHECK(j["trans"] == 0.25);
  for (const char* k : {"ssim", "psnr", "cpbd", "fid", "csim"}) CHECK(j[k] == "n/a");

  report.frames = FrameMetrics{0.5, kPsnrIdentical, 0.25, 2};
  j = nlohmann::json::parse(to_json(report));
  CHECK(j.size() == 8);
  CHECK(j["ssim"] == 0.5);
  CHECK(j["psnr"] == "inf");
  CHECK(j["cpbd"] == 0.25);
  CHECK(j["fid"] == "n/a");
  CHECK(j["csim"] == "n/a");
}
