// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "listenhead/tensor.hpp"
#include "listenhead/wav.hpp"

namespace listenhead {

inline constexpr std::size_t kFeatureDim = 45;
inline constexpr std::size_t kMfccDim = 14;
inline constexpr int kVideoFps = 30;

// Column layout of an acoustic feature row.
inline constexpr std::size_t kColMfcc = 0;
inline constexpr std::size_t kColDelta1 = 14;
inline constexpr std::size_t kColDelta2 = 28;
inline constexpr std::size_t kColZcr = 42;
inline constexpr std::size_t kColLoudness = 43;
inline constexpr std::size_t kColEnergy = 44;

inline constexpr double kLogFloor = 1e-10;

struct FrontendConfig {
  std::size_t window_len = 1024;
  std::size_t n_mels = 26;
};

void validate(const FrontendConfig& config);

/// Per-video-frame acoustic features: rows is [T x 45] at 30 fps.
struct AcousticFeatures {
  Tensor rows;

  std::size_t frames() const { return rows.empty() ? 0 : rows.dim(0); }
};

/// floor(num_samples * fps / sample_rate), in exact integer arithmetic.
std::size_t video_frame_count(std::size_t num_samples, int sample_rate, int fps = kVideoFps);

/// Frame i is centered on sample round(i * sample_rate / fps), spans
/// window_len samples starting window_len/2 before the center, and is
/// zero-padded outside the signal.
std::vector<std::vector<double>> frame_for_video(const Waveform& w, int fps,
                                                 std::size_t window_len);

/// Power spectrum |DFT(hann(frame))|^2, bins 0..N/2.
std::vector<double> power_spectrum(std::span<const double> frame);

/// Triangular mel filterbank (HTK mel scale, 0 Hz to sample_rate/2) sampled
/// on the N/2+1 DFT bins of an N-point frame. Row-major [n_mels x bins].
std::vector<double> mel_filterbank(std::size_t frame_len, int sample_rate, std::size_t n_mels);

/// Center frequency in Hz of mel band `band`.
double mel_band_center_hz(std::size_t band, int sample_rate, std::size_t n_mels);

/// Filterbank energies (before the log) of one frame.
std::vector<double> mel_energies(std::span<const double> frame, int sample_rate,
                                 std::size_t n_mels);

/// Orthonormal type-II DCT, first `count` coefficients.
std::vector<double> dct2_orthonormal(std::span<const double> input, std::size_t count);

/// Hann -> power spectrum -> mel -> log(e + 1e-10) -> DCT-II, first n_mfcc.
std::vector<double> mfcc(std::span<const double> frame, int sample_rate, std::size_t n_mels,
                         std::size_t n_mfcc = kMfccDim);

/// Regression deltas (window 2, edges replicated) of [T x D] rows. Returns
/// [T x 2D]: first-order block then second-order block.
std::vector<std::vector<double>> delta_features(const std::vector<std::vector<double>>& rows);

double zcr(std::span<const double> frame);
double loudness(std::span<const double> frame);
double energy(std::span<const double> frame);

/// Computes mfcc/zcr/loudness/energy frame by frame with a cached filterbank.
class FeatureExtractor {
 public:
  FeatureExtractor(int sample_rate, FrontendConfig config);

  std::vector<double> mfcc(std::span<const double> frame) const;
  AcousticFeatures extract(const Waveform& w) const;

 private:
  int sample_rate_;
  FrontendConfig config_;
  std::vector<double> filterbank_;
};

AcousticFeatures extract_features(const Waveform& w, const FrontendConfig& config = {});

/// Column headers of the feature CSV, in layout order.
std::vector<std::string> feature_column_names();

/// Header line plus one row per frame, 9 significant digits.
void write_feature_csv(const std::filesystem::path& path, const AcousticFeatures& features);

}  // namespace listenhead
