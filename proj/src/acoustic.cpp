// SPDX-License-Identifier: Apache-2.0
#include "listenhead/acoustic.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>

#include <fftw3.h>

#include "listenhead/error.hpp"

namespace listenhead {

namespace {

constexpr double kPi = std::numbers::pi;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// FFTW plans are cached per length; FFTW_UNALIGNED lets one plan serve any buffer.
fftw_plan r2c_plan(std::size_t n) {
  static std::map<std::size_t, std::unique_ptr<fftw_plan_s, decltype(&fftw_destroy_plan)>> plans;
  auto it = plans.find(n);
  if (it == plans.end()) {
    std::vector<double> in(n);
    std::vector<std::complex<double>> out(n / 2 + 1);
    const fftw_plan plan = fftw_plan_dft_r2c_1d(
        static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw NumericError("FFTW could not plan a transform of length " + std::to_string(n));
    it = plans.emplace(n, std::unique_ptr<fftw_plan_s, decltype(&fftw_destroy_plan)>(
                              plan, &fftw_destroy_plan)).first;
  }
  return it->second.get();
}

std::vector<double> log_mel(std::span<const double> frame, std::span<const double> filterbank,
                            std::size_t n_mels) {
  const std::vector<double> power = power_spectrum(frame);
  const std::size_t bins = power.size();
  std::vector<double> out(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    double e = 0.0;
    for (std::size_t k = 0; k < bins; ++k) e += filterbank[m * bins + k] * power[k];
    out[m] = std::log(e + kLogFloor);
  }
  return out;
}

}  // namespace

void validate(const FrontendConfig& config) {
  if (config.window_len < 2) throw ContractError("frontend.window_len must be >= 2");
  if (config.n_mels < kMfccDim)
    throw ContractError("frontend.n_mels must be >= " + std::to_string(kMfccDim));
}

std::size_t video_frame_count(std::size_t num_samples, int sample_rate, int fps) {
  return num_samples * static_cast<std::size_t>(fps) / static_cast<std::size_t>(sample_rate);
}

std::vector<std::vector<double>> frame_for_video(const Waveform& w, int fps,
                                                 std::size_t window_len) {
  if (window_len < 2) throw ContractError("frame_for_video: window_len must be >= 2");
  if (fps < 1) throw ContractError("frame_for_video: fps must be >= 1");
  const std::size_t count = video_frame_count(w.samples.size(), w.sample_rate, fps);
  const auto n = static_cast<long long>(w.samples.size());
  const auto sr = static_cast<long long>(w.sample_rate);
  std::vector<std::vector<double>> frames(count, std::vector<double>(window_len, 0.0));
  for (std::size_t i = 0; i < count; ++i) {
    // round(i * sr / fps), halves rounded up
    const long long center = (2 * static_cast<long long>(i) * sr + fps) / (2LL * fps);
    const long long start = center - static_cast<long long>(window_len / 2);
    for (std::size_t j = 0; j < window_len; ++j) {
      const long long idx = start + static_cast<long long>(j);
      if (idx >= 0 && idx < n) frames[i][j] = w.samples[static_cast<std::size_t>(idx)];
    }
  }
  return frames;
}

std::vector<double> power_spectrum(std::span<const double> frame) {
  const std::size_t n = frame.size();
  if (n < 2) throw ContractError("power_spectrum: frame length must be >= 2");
  std::vector<double> windowed(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                             static_cast<double>(n - 1));
    windowed[i] = frame[i] * hann;
  }
  const std::size_t bins = n / 2 + 1;
  std::vector<double> power(bins);
  std::vector<std::complex<double>> spectrum(bins);
  fftw_execute_dft_r2c(r2c_plan(n), windowed.data(),
                       reinterpret_cast<fftw_complex*>(spectrum.data()));
  for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(spectrum[k]);
  return power;
}

std::vector<double> mel_filterbank(std::size_t frame_len, int sample_rate, std::size_t n_mels) {
  if (n_mels < 1) throw ContractError("mel_filterbank: n_mels must be >= 1");
  const std::size_t bins = frame_len / 2 + 1;
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));

  std::vector<double> bank(n_mels * bins, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(frame_len);
      double weight = 0.0;
      if (f >= lo && f <= center) {
        weight = (f - lo) / (center - lo);
      } else if (f > center && f <= hi) {
        weight = (hi - f) / (hi - center);
      }
      bank[m * bins + k] = weight;
    }
  }
  return bank;
}

double mel_band_center_hz(std::size_t band, int sample_rate, std::size_t n_mels) {
  const double top = hz_to_mel(sample_rate / 2.0);
  return mel_to_hz(top * static_cast<double>(band + 1) / static_cast<double>(n_mels + 1));
}

std::vector<double> mel_energies(std::span<const double> frame, int sample_rate,
                                 std::size_t n_mels) {
  const std::vector<double> bank = mel_filterbank(frame.size(), sample_rate, n_mels);
  const std::vector<double> power = power_spectrum(frame);
  std::vector<double> out(n_mels, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m)
    for (std::size_t k = 0; k < power.size(); ++k) out[m] += bank[m * power.size() + k] * power[k];
  return out;
}

std::vector<double> dct2_orthonormal(std::span<const double> input, std::size_t count) {
  const std::size_t n = input.size();
  if (count > n) throw ContractError("dct2_orthonormal: more coefficients than inputs");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += input[i] * std::cos(kPi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                                 (2.0 * static_cast<double>(n)));
    out[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return out;
}

std::vector<double> mfcc(std::span<const double> frame, int sample_rate, std::size_t n_mels,
                         std::size_t n_mfcc) {
  if (frame.size() < 2) throw ContractError("mfcc: frame length must be >= 2");
  if (n_mfcc > n_mels) throw ContractError("mfcc: n_mfcc must not exceed n_mels");
  const std::vector<double> bank = mel_filterbank(frame.size(), sample_rate, n_mels);
  return dct2_orthonormal(log_mel(frame, bank, n_mels), n_mfcc);
}

std::vector<std::vector<double>> delta_features(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ContractError("delta_features: need at least one frame");
  const std::size_t steps = rows.size(), dim = rows[0].size();
  constexpr int kWindow = 2;
  constexpr double kNorm = 2.0 * (1 * 1 + 2 * 2);

  const auto regress = [&](const std::vector<std::vector<double>>& x) {
    std::vector<std::vector<double>> d(steps, std::vector<double>(dim, 0.0));
    const auto clamp = [&](long long t) {
      return static_cast<std::size_t>(std::clamp<long long>(t, 0, static_cast<long long>(steps) - 1));
    };
    for (std::size_t t = 0; t < steps; ++t)
      for (int n = 1; n <= kWindow; ++n) {
        const auto& ahead = x[clamp(static_cast<long long>(t) + n)];
        const auto& behind = x[clamp(static_cast<long long>(t) - n)];
        for (std::size_t j = 0; j < dim; ++j) d[t][j] += n * (ahead[j] - behind[j]);
      }
    for (auto& row : d)
      for (double& v : row) v /= kNorm;
    return d;
  };

  for (const auto& r : rows)
    if (r.size() != dim) throw ContractError("delta_features: ragged rows");
  const auto first = regress(rows);
  const auto second = regress(first);
  std::vector<std::vector<double>> out(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    out[t] = first[t];
    out[t].insert(out[t].end(), second[t].begin(), second[t].end());
  }
  return out;
}

double zcr(std::span<const double> frame) {
  if (frame.size() < 2) throw ContractError("zcr: frame length must be >= 2");
  std::size_t crossings = 0;
  for (std::size_t i = 1; i < frame.size(); ++i)
    if ((frame[i - 1] < 0.0) != (frame[i] < 0.0)) ++crossings;
  return static_cast<double>(crossings) / static_cast<double>(frame.size() - 1);
}

double energy(std::span<const double> frame) {
  if (frame.empty()) throw ContractError("energy: empty frame");
  double acc = 0.0;
  for (double s : frame) acc += s * s;
  return acc;
}

double loudness(std::span<const double> frame) {
  if (frame.empty()) throw ContractError("loudness: empty frame");
  return 10.0 * std::log10(energy(frame) / static_cast<double>(frame.size()) + kLogFloor);
}

FeatureExtractor::FeatureExtractor(int sample_rate, FrontendConfig config)
    : sample_rate_(sample_rate),
      config_(config),
      filterbank_(mel_filterbank(config.window_len, sample_rate, config.n_mels)) {
  validate(config_);
}

std::vector<double> FeatureExtractor::mfcc(std::span<const double> frame) const {
  if (frame.size() != config_.window_len)
    throw ContractError("FeatureExtractor: frame length differs from window_len");
  return dct2_orthonormal(log_mel(frame, filterbank_, config_.n_mels), kMfccDim);
}

AcousticFeatures FeatureExtractor::extract(const Waveform& w) const {
  validate(w);
  if (w.sample_rate != sample_rate_)
    throw ContractError("FeatureExtractor: waveform sample rate differs from extractor");
  const auto frames = frame_for_video(w, kVideoFps, config_.window_len);
  if (frames.empty())
    throw DataError("audio shorter than one video frame (" +
                    std::to_string(w.duration_seconds()) + " s)");

  std::vector<std::vector<double>> cepstra;
  cepstra.reserve(frames.size());
  for (const auto& f : frames) cepstra.push_back(mfcc(f));
  const auto deltas = delta_features(cepstra);

  std::vector<double> rows;
  rows.reserve(frames.size() * kFeatureDim);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    rows.insert(rows.end(), cepstra[t].begin(), cepstra[t].end());
    rows.insert(rows.end(), deltas[t].begin(), deltas[t].end());
    rows.push_back(zcr(frames[t]));
    rows.push_back(loudness(frames[t]));
    rows.push_back(energy(frames[t]));
  }
  return AcousticFeatures{Tensor({frames.size(), kFeatureDim}, std::move(rows))};
}

AcousticFeatures extract_features(const Waveform& w, const FrontendConfig& config) {
  return FeatureExtractor(w.sample_rate, config).extract(w);
}

std::vector<std::string> feature_column_names() {
  std::vector<std::string> names;
  char buf[16];
  for (const char* prefix : {"mfcc", "d1_", "d2_"})
    for (std::size_t i = 0; i < kMfccDim; ++i) {
      std::snprintf(buf, sizeof buf, "%s%02zu", prefix, i);
      names.emplace_back(buf);
    }
  names.emplace_back("zcr");
  names.emplace_back("loudness");
  names.emplace_back("energy");
  return names;
}

void write_feature_csv(const std::filesystem::path& path, const AcousticFeatures& features) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write feature file: " + path.string());
  const auto names = feature_column_names();
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  char buf[32];
  for (std::size_t t = 0; t < features.frames(); ++t) {
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", features.rows.at(t, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing feature file: " + path.string());
}

}  // namespace listenhead
