// SPDX-License-Identifier: Apache-2.0
#include "listenhead/train.hpp"

#include <cmath>
#include <numeric>

#include "listenhead/error.hpp"
#include "listenhead/rng.hpp"

namespace listenhead {

void validate(const TrainConfig& c) {
  if (!(c.adam.lr >= 0.0) || !std::isfinite(c.adam.lr))
    throw ContractError("train.lr must be a finite value >= 0");
  if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0)) throw ContractError("train.beta1 must lie in [0, 1)");
  if (!(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0)) throw ContractError("train.beta2 must lie in [0, 1)");
  if (!(c.adam.eps > 0.0)) throw ContractError("train.eps must be > 0");
  if (!(c.clip_norm >= 0.0) || !std::isfinite(c.clip_norm))
    throw ContractError("train.clip_norm must be a finite value >= 0 (0 disables clipping)");
}

FeatureNormalizer fit_normalizer(const std::vector<TrainingClip>& clips) {
  FeatureNormalizer n;
  std::vector<double> sum(kFeatureDim, 0.0), sq(kFeatureDim, 0.0);
  std::size_t count = 0;
  for (const auto& clip : clips)
    for (std::size_t t = 0; t < clip.features.frames(); ++t, ++count)
      for (std::size_t j = 0; j < kFeatureDim; ++j) sum[j] += clip.features.rows.at(t, j);
  if (count == 0) return n;
  for (std::size_t j = 0; j < kFeatureDim; ++j) n.shift[j] = sum[j] / static_cast<double>(count);
  for (const auto& clip : clips)
    for (std::size_t t = 0; t < clip.features.frames(); ++t)
      for (std::size_t j = 0; j < kFeatureDim; ++j) {
        const double d = clip.features.rows.at(t, j) - n.shift[j];
        sq[j] += d * d;
      }
  for (std::size_t j = 0; j < kFeatureDim; ++j) {
    const double sd = std::sqrt(sq[j] / static_cast<double>(count));
    n.scale[j] = sd > 1e-8 ? sd : 1.0;
  }
  return n;
}

Checkpoint begin_training(ListenerHeadModel model, const FrontendConfig& frontend,
                          const std::vector<TrainingClip>& clips, const TrainConfig& config) {
  validate(config);
  model.normalizer = fit_normalizer(clips);
  Checkpoint state;
  state.optimizer = make_adam_state(flatten(model.params), config.adam);
  state.model = std::move(model);
  state.frontend = frontend;
  state.rng = Rng(config.seed);
  state.epoch = 0;
  return state;
}

namespace {

void check_clip(const ModelConfig& config, const TrainingClip& clip) {
  if (clip.features.rows.rank() != 2 || clip.features.rows.dim(1) != kFeatureDim)
    throw DataError("clip " + clip.id + ": features are not [T x 45]");
  if (clip.target.dims != config.coeff_dims || clip.reference.dims() != config.coeff_dims)
    throw DataError("clip " + clip.id + ": coefficient dims differ from the model config");
  if (clip.target.frames() != clip.features.frames())
    throw DataError("clip " + clip.id + ": " + std::to_string(clip.features.frames()) +
                    " feature frames but " + std::to_string(clip.target.frames()) +
                    " coefficient frames");
}

}  // namespace

ClipGradients clip_gradients(const ListenerHeadModel& model, const TrainingClip& clip,
                             const LossOptions& options) {
  check_clip(model.config, clip);
  Tape tape;
  std::vector<Var> leaves;
  const auto params = bind_parameters(tape, model.params, true, &leaves);
  const Var pred = forward(params, model.config, tape.constant(prepare_input(model, clip.features)),
                           tape.constant(Tensor::vector(clip.reference.flat())));
  const TapedLoss loss = coefficient_loss(pred, clip.target.values, model.config.coeff_dims, options);
  if (!std::isfinite(loss.terms.total))
    throw NumericError("non-finite loss on clip " + clip.id);
  const Gradients grads = tape.backward(loss.total);
  ClipGradients out{loss.terms, {}};
  out.grads.reserve(leaves.size());
  for (const Var& v : leaves) out.grads.push_back(grads.of(v));
  return out;
}

std::vector<EpochReport> train(Checkpoint& state, const std::vector<TrainingClip>& clips,
                               const TrainConfig& config,
                               const std::function<void(const EpochReport&)>& on_epoch) {
  validate(config);
  if (clips.empty()) throw DataError("training set is empty");
  for (const auto& clip : clips) check_clip(state.model.config, clip);
  // Learning rate and decays come from the run config; moments carry over.
  state.optimizer.hyper = config.adam;

  const auto names = parameter_names(state.model.params);
  std::vector<EpochReport> reports;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    std::vector<std::size_t> order(clips.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    state.rng.shuffle(order);

    LossBreakdown acc;
    std::size_t frames = 0;
    for (std::size_t idx : order) {
      const TrainingClip& clip = clips[idx];
      ClipGradients step = clip_gradients(state.model, clip, config.loss);
      clip_global_norm(step.grads, config.clip_norm);
      std::vector<Tensor> params = flatten(state.model.params);
      optimizer_step(params, step.grads, state.optimizer, names);
      assign(state.model.params, std::move(params));

      acc.angle += step.loss.angle;
      acc.translation += step.loss.translation;
      acc.expression += step.loss.expression;
      acc.motion += step.loss.motion;
      acc.total += step.loss.total;
      frames += clip.target.frames();
    }
    ++state.epoch;

    const double n = static_cast<double>(clips.size());
    EpochReport report;
    report.epoch = state.epoch;
    report.mean = {acc.angle / n, acc.translation / n, acc.expression / n, acc.motion / n,
                   acc.total / n};
    report.mean_total_per_frame = acc.total / static_cast<double>(frames);
    reports.push_back(report);
    if (config.checkpoint_path) save_checkpoint(state, *config.checkpoint_path);
    if (on_epoch) on_epoch(report);
  }
  return reports;
}

GradCheckReport check_model_gradients(const ModelGradCheck& check, std::uint64_t seed) {
  if (check.frames == 0) throw ContractError("gradcheck.frames must be >= 1");
  ModelConfig config = check.model;
  config.seed = seed;
  validate(config);
  ListenerHeadModel model = init_params(config);
  const std::size_t dc = config.coeff_dims.total();

  Rng rng(seed ^ 0x5DEECE66DULL);
  visit_parameters(
      [&](const std::string&, Tensor& t) {
        std::vector<double> v(t.size());
        if (t.rank() == 1) {
          for (double& x : v) x = rng.symmetric(check.bias_range);
        } else {
          const std::size_t fan_in = t.size() / t.dim(0);
          const double bound = check.weight_gain / std::sqrt(static_cast<double>(fan_in));
          for (double& x : v) x = rng.symmetric(bound);
        }
        t = Tensor(t.shape(), std::move(v));
      },
      model.params);
  std::vector<double> feats(config.in_dim * check.frames), target(check.frames * dc), ref(dc);
  for (double& v : feats) v = rng.normal();
  for (double& v : target) v = 0.5 * rng.normal();
  for (double& v : ref) v = 0.5 * rng.normal();
  const Tensor features({config.in_dim, check.frames}, std::move(feats));
  const Tensor target_values({check.frames, dc}, std::move(target));
  const Tensor reference = Tensor::vector(std::move(ref));

  const TapedFunction f = [&](Tape& tape, std::span<const Var> leaves) {
    const auto params = bind_parameters(model.params, leaves);
    const Var pred = forward(params, config, tape.constant(features), tape.constant(reference));
    return coefficient_loss(pred, target_values, config.coeff_dims, check.loss).total;
  };
  return grad_check(f, flatten(model.params), check.epsilon, check.tolerance);
}

}  // namespace listenhead
