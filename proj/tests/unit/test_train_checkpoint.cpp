// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "fixtures.hpp"
#include "listenhead/checkpoint.hpp"
#include "listenhead/error.hpp"
#include "listenhead/train.hpp"

using namespace listenhead;
using testing::random_tensor;
using testing::tiny_config;

namespace {

std::vector<TrainingClip> random_clips(std::uint64_t seed, std::size_t count = 3) {
  Rng rng(seed);
  std::vector<TrainingClip> clips;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t frames = 4 + rng.below(4);
    const CoeffDims dims = tiny_config().coeff_dims;
    clips.push_back({"clip" + std::to_string(i), testing::random_features(rng, frames),
                     {dims, random_tensor(rng, {frames, dims.total()}, 0.5)},
                     testing::random_frame(rng, dims)});
  }
  return clips;
}

TrainConfig quick(std::size_t epochs, std::uint64_t seed = 3) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = seed;
  c.adam.lr = 5e-3;
  return c;
}

Checkpoint fresh(const std::vector<TrainingClip>& clips, const TrainConfig& cfg) {
  return begin_training(init_params(tiny_config(1)), {}, clips, cfg);
}

std::vector<double> totals(const std::vector<EpochReport>& reports) {
  std::vector<double> out;
  for (const auto& r : reports) out.push_back(r.mean.total);
  return out;
}

CheckpointError::Kind error_kind(const std::string& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("checkpoint was accepted");
  return CheckpointError::Kind::kMalformed;
}

}  // namespace

TEST_CASE("begin_training fits the normaliser and zeroes the optimizer") {
  const auto clips = random_clips(1);
  const Checkpoint state = fresh(clips, quick(1));
  CHECK(state.epoch == 0);
  CHECK(state.optimizer.step == 0);
  for (const Tensor& m : state.optimizer.first_moment)
    for (double v : m.values()) CHECK(v == 0.0);
  const FeatureNormalizer& n = state.model.normalizer;
  double mean0 = 0.0;
  std::size_t frames = 0;
  for (const auto& c : clips)
    for (std::size_t t = 0; t < c.features.frames(); ++t, ++frames) mean0 += c.features.rows.at(t, 0);
  CHECK(n.shift[0] == doctest::Approx(mean0 / double(frames)).epsilon(1e-12));
  for (double s : n.scale) CHECK(s > 0.0);
}

TEST_CASE("zero learning rate gives the same loss every epoch") {
  const auto clips = random_clips(2);
  TrainConfig cfg = quick(3);
  cfg.adam.lr = 0.0;
  Checkpoint state = fresh(clips, cfg);
  const auto before = flatten(state.model.params);
  const auto losses = totals(train(state, clips, cfg));
  REQUIRE(losses.size() == 3);
  CHECK(losses[1] == losses[0]);
  CHECK(losses[2] == losses[0]);
  CHECK(flatten(state.model.params) == before);
  CHECK(state.epoch == 3);
}

TEST_CASE("training lowers the loss on a small fixed set") {
  const auto clips = random_clips(3);
  TrainConfig cfg = quick(40);
  Checkpoint state = fresh(clips, cfg);
  const auto losses = totals(train(state, clips, cfg));
  CHECK(losses.back() < losses.front());
}

TEST_CASE("same seed gives identical trajectories and byte-identical checkpoints") {
  const auto clips = random_clips(4);
  const TrainConfig cfg = quick(5);
  Checkpoint a = fresh(clips, cfg), b = fresh(clips, cfg);
  CHECK(totals(train(a, clips, cfg)) == totals(train(b, clips, cfg)));
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));

  Checkpoint c = begin_training(init_params(tiny_config(1)), {}, clips, quick(5, 99));
  train(c, clips, quick(5, 99));
  CHECK(serialize_checkpoint(c) != serialize_checkpoint(a));
}

TEST_CASE("resuming from a saved checkpoint equals uninterrupted training") {
  testing::TempDir dir("resume");
  const auto clips = random_clips(5);
  Checkpoint straight = fresh(clips, quick(10));
  const auto all = totals(train(straight, clips, quick(10)));

  TrainConfig first = quick(5);
  first.checkpoint_path = dir / "run.lhwn";
  Checkpoint part = fresh(clips, first);
  const auto head = totals(train(part, clips, first));
  Checkpoint resumed = load_checkpoint(dir / "run.lhwn");
  CHECK(resumed.epoch == 5);
  const auto tail = totals(train(resumed, clips, quick(5)));

  std::vector<double> joined = head;
  joined.insert(joined.end(), tail.begin(), tail.end());
  CHECK(joined == all);
  CHECK(serialize_checkpoint(resumed) == serialize_checkpoint(straight));
}

TEST_CASE("checkpoint round trip is lossless") {
  testing::TempDir dir("ckpt");
  const auto clips = random_clips(6);
  Checkpoint state = fresh(clips, quick(2));
  train(state, clips, quick(2));
  state.frontend.n_mels = 30;
  const std::string bytes = serialize_checkpoint(state);
  CHECK(bytes.compare(0, 4, "LHWN") == 0);

  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.model.config == state.model.config);
  CHECK(flatten(back.model.params) == flatten(state.model.params));
  CHECK(back.model.normalizer == state.model.normalizer);
  CHECK(back.optimizer == state.optimizer);
  CHECK(back.rng == state.rng);
  CHECK(back.epoch == state.epoch);
  CHECK(back.frontend.n_mels == 30);
  CHECK(serialize_checkpoint(back) == bytes);

  save_checkpoint(state, dir / "a.lhwn");
  CHECK(testing::slurp(dir / "a.lhwn") == bytes);
  CHECK(serialize_checkpoint(load_checkpoint(dir / "a.lhwn")) == bytes);
}

TEST_CASE("checkpoint corruption is reported by kind") {
  using Kind = CheckpointError::Kind;
  const auto clips = random_clips(7, 1);
  const std::string bytes = serialize_checkpoint(fresh(clips, quick(1)));

  std::string magic = bytes;
  magic[0] = 'X';
  CHECK(error_kind(magic) == Kind::kNotACheckpoint);
  CHECK(error_kind("") == Kind::kNotACheckpoint);

  std::string version = bytes;
  version[4] = char(kCheckpointVersion + 1);
  CHECK(error_kind(version) == Kind::kUnsupportedVersion);

  CHECK(error_kind(bytes.substr(0, bytes.size() - 8)) == Kind::kTruncated);
  CHECK(error_kind(bytes.substr(0, 12)) == Kind::kTruncated);
  CHECK(error_kind(bytes.substr(0, 40)) == Kind::kTruncated);
  CHECK(error_kind(bytes + std::string(8, '\0')) == Kind::kManifestMismatch);

  // Rename one manifest entry in place so the header keeps its length.
  std::string swapped = bytes;
  swapped.replace(swapped.find("head.bias"), 9, "head.bixs");
  CHECK(error_kind(swapped) == Kind::kManifestMismatch);

  testing::TempDir dir("bad");
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.lhwn"), DataError);
}

TEST_CASE("a non-finite loss aborts training and keeps the last good checkpoint") {
  testing::TempDir dir("nan");
  auto clips = random_clips(8, 2);
  TrainConfig cfg = quick(2);
  cfg.checkpoint_path = dir / "run.lhwn";
  Checkpoint state = fresh(clips, cfg);
  train(state, clips, cfg);
  const std::string good = testing::slurp(dir / "run.lhwn");

  clips[1].target.values = Tensor::filled(clips[1].target.values.shape(), 1e308);
  CHECK_THROWS_AS(train(state, clips, cfg), NumericError);
  CHECK(testing::slurp(dir / "run.lhwn") == good);
  CHECK(load_checkpoint(dir / "run.lhwn").epoch == 2);
}

TEST_CASE("training rejects mismatched clips") {
  auto clips = random_clips(9, 2);
  Checkpoint state = fresh(clips, quick(1));
  Rng rng(1);
  auto short_target = clips;
  short_target[0].target.values = random_tensor(rng, {2, 10});
  CHECK_THROWS_AS(train(state, short_target, quick(1)), DataError);
  CHECK_THROWS_AS(train(state, {}, quick(1)), DataError);
  TrainConfig bad = quick(1);
  bad.adam.lr = -1.0;
  CHECK_THROWS_AS(train(state, clips, bad), ContractError);
}

TEST_CASE("clip gradients agree with finite differences through the full model") {
  ModelGradCheck check;
  check.model = tiny_config();
  check.loss.motion_on_angle = true;
  const GradCheckReport r = check_model_gradients(check, 5);
  CHECK(r.pass);
  CHECK(r.max_relative_error < 1e-4);
}
