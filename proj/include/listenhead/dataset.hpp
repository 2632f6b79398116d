// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "listenhead/acoustic.hpp"
#include "listenhead/error.hpp"
#include "listenhead/model.hpp"
#include "listenhead/train.hpp"

namespace listenhead {

enum class Attitude { kPositive, kNatural, kNegative };
enum class Split { kTrain, kTest, kOod };

std::string to_string(Attitude a);
std::string to_string(Split s);

struct ClipRecord {
  std::string id;
  std::filesystem::path audio;   // absolute
  std::filesystem::path coeffs;  // absolute
  std::size_t ref_frame = 0;
  Attitude attitude = Attitude::kNatural;
  Split split = Split::kTrain;
};

/// Manifest problems, tagged with the 1-based data row (0 for the header).
class ManifestError : public DataError {
 public:
  enum class Kind { kMissingColumn, kVocabulary, kDanglingFile, kMalformedRow, kSplitOverlap };
  ManifestError(Kind kind, std::size_t row, const std::string& what);
  Kind kind() const { return kind_; }
  std::size_t row() const { return row_; }

 private:
  Kind kind_;
  std::size_t row_;
};

/// Reads `id,audio,coeffs,ref_frame,attitude,split` (columns located by header
/// name, any order). Fields are comma separated without quoting. Relative
/// paths resolve against the manifest's directory.
std::vector<ClipRecord> load_manifest(const std::filesystem::path& path);

/// Headerless CSV, one frame per row: angle, translation, expression.
CoeffSequence load_coeffs(const std::filesystem::path& path, const CoeffDims& dims);
void write_coeffs(const std::filesystem::path& path, const CoeffSequence& coeffs);

/// Features plus ground truth for one record. A one-frame disagreement between
/// audio and coefficients is resolved by dropping the longer side's last
/// frame; anything larger is a DataError.
TrainingClip load_clip(const ClipRecord& record, const CoeffDims& dims,
                       const FrontendConfig& frontend = {});

std::vector<TrainingClip> load_clips(const std::vector<ClipRecord>& records, const CoeffDims& dims,
                                     const FrontendConfig& frontend = {});

/// Ground-truth listener motion derived from speaker features. A causally
/// smoothed tanh of log-energy plus scaled ZCR drives angle and translation
/// directly and the expression block at lags 0..3.
CoeffSequence synthetic_targets(const AcousticFeatures& features, const CoeffDims& dims);

/// The speaker waveform of synthetic clip `index`: 2-4 tones in 150-1000 Hz
/// under a piecewise-linear envelope, 16 kHz, already PCM16-exact.
Waveform synthetic_audio(std::uint64_t seed, std::size_t index, double duration_s);

/// Writes manifest.csv plus clip_NNN.wav / clip_NNN.csv into `dir` and returns
/// the manifest path. Output bytes depend only on the arguments.
std::filesystem::path generate_synthetic(std::uint64_t seed, std::size_t n_clips,
                                         double duration_s, const CoeffDims& dims,
                                         const std::filesystem::path& dir);

}  // namespace listenhead
