// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "listenhead/acoustic.hpp"
#include "listenhead/checkpoint.hpp"
#include "listenhead/grad_check.hpp"
#include "listenhead/loss.hpp"
#include "listenhead/model.hpp"
#include "listenhead/optimizer.hpp"

namespace listenhead {

struct TrainConfig {
  std::size_t epochs = 50;
  AdamConfig adam;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;
  LossOptions loss;
  std::optional<std::filesystem::path> checkpoint_path;
};

void validate(const TrainConfig& config);

/// One training example: speaker features, listener ground truth and the
/// reference frame that seeds the decoder.
struct TrainingClip {
  std::string id;
  AcousticFeatures features;
  CoeffSequence target;
  CoeffFrame reference;
};

struct EpochReport {
  std::uint64_t epoch = 0;
  LossBreakdown mean;             // mean over clips of per-clip sums
  double mean_total_per_frame = 0.0;
};

/// Per-dimension mean and standard deviation over every frame of `clips`.
/// Dimensions with (near) zero spread keep scale 1.
FeatureNormalizer fit_normalizer(const std::vector<TrainingClip>& clips);

/// Fresh training state: normaliser fitted on `clips`, zeroed Adam moments,
/// shuffle generator seeded from config.seed.
Checkpoint begin_training(ListenerHeadModel model, const FrontendConfig& frontend,
                          const std::vector<TrainingClip>& clips, const TrainConfig& config);

/// Forward pass + loss + gradients for one clip.
struct ClipGradients {
  LossBreakdown loss;
  std::vector<Tensor> grads;  // visit order
};

ClipGradients clip_gradients(const ListenerHeadModel& model, const TrainingClip& clip,
                             const LossOptions& options = {});

/// Runs config.epochs further epochs on `state`. Each epoch shuffles the clip
/// order, then per clip: forward, loss, backward, global-norm clipping, Adam.
/// When config.checkpoint_path is set the state is saved after every epoch; a
/// non-finite loss throws NumericError and leaves the previous save intact.
std::vector<EpochReport> train(Checkpoint& state, const std::vector<TrainingClip>& clips,
                               const TrainConfig& config,
                               const std::function<void(const EpochReport&)>& on_epoch = {});

/// Gradient check of the full model plus loss on a random clip of `frames`
/// frames. `seed` draws the parameters, features, target and reference.
/// Weights are uniform in +-weight_gain/sqrt(fan_in); biases are uniform in
/// +-bias_range rather than zero, since zero biases can leave a post-net ReLU
/// input exactly on its kink.
struct ModelGradCheck {
  ModelConfig model;
  LossOptions loss;
  std::size_t frames = 3;
  double epsilon = 1e-4;
  double tolerance = 1e-4;
  double weight_gain = 1.0;
  double bias_range = 0.5;
};

GradCheckReport check_model_gradients(const ModelGradCheck& check, std::uint64_t seed);

}  // namespace listenhead
