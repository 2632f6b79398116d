// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "listenhead/acoustic.hpp"
#include "listenhead/error.hpp"
#include "listenhead/model.hpp"
#include "listenhead/optimizer.hpp"
#include "listenhead/rng.hpp"

namespace listenhead {

inline constexpr char kCheckpointMagic[4] = {'L', 'H', 'W', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to resume training or run inference.
struct Checkpoint {
  ListenerHeadModel model;
  FrontendConfig frontend;
  OptimizerState optimizer;
  Rng rng;
  std::uint64_t epoch = 0;
};

class CheckpointError : public DataError {
 public:
  enum class Kind { kNotACheckpoint, kUnsupportedVersion, kTruncated, kManifestMismatch, kMalformed };

  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Layout: "LHWN", u32 LE version, u64 LE header length, UTF-8 JSON header
/// (config, optimizer scalars, rng state, tensor manifest with name, shape and
/// byte offset), then little-endian f64 blobs in manifest order.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

/// Writes through a temporary file and renames, so a crash never leaves a
/// partially written checkpoint at `path`.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace listenhead
