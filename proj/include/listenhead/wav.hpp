// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

namespace listenhead {

/// Mono audio with samples in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Throws ContractError unless non-empty, rate >= 8000 Hz and |x| <= 1.
void validate(const Waveform& w);

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a RIFF/WAVE file (16-bit PCM or 32-bit float, any channel count).
/// Channels are averaged to mono; PCM is scaled by 1/32768.
Waveform load_wav(const std::filesystem::path& path);

/// Writes a mono file. PCM16 quantizes with round(x * 32768), clamped.
void save_wav(const std::filesystem::path& path, const Waveform& w,
              WavEncoding encoding = WavEncoding::kPcm16);

/// The exact value a sample takes after a PCM16 save/load round trip.
double quantize_pcm16(double sample);

}  // namespace listenhead
