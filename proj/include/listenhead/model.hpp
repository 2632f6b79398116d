// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "listenhead/acoustic.hpp"
#include "listenhead/autodiff.hpp"
#include "listenhead/tensor.hpp"

namespace listenhead {

/// Widths of the predicted coefficient groups, in column order.
struct CoeffDims {
  std::size_t angle = 3;
  std::size_t translation = 3;
  std::size_t expression = 64;

  std::size_t total() const { return angle + translation + expression; }
  std::size_t angle_begin() const { return 0; }
  std::size_t translation_begin() const { return angle; }
  std::size_t expression_begin() const { return angle + translation; }

  bool operator==(const CoeffDims&) const = default;
};

/// One frame of listener head motion: pose angle (radians), translation and
/// expression coefficients.
struct CoeffFrame {
  std::vector<double> angle;
  std::vector<double> translation;
  std::vector<double> expression;

  CoeffDims dims() const { return {angle.size(), translation.size(), expression.size()}; }
  std::vector<double> flat() const;
  static CoeffFrame from_flat(std::span<const double> values, const CoeffDims& dims);
};

/// T frames stored as a [T x dims.total()] matrix.
struct CoeffSequence {
  CoeffDims dims;
  Tensor values;

  std::size_t frames() const { return values.empty() ? 0 : values.dim(0); }
  CoeffFrame frame(std::size_t t) const;
};

struct ModelConfig {
  std::size_t in_dim = kFeatureDim;
  std::size_t residual_channels = 64;
  std::size_t skip_channels = 128;
  std::size_t kernel_size = 2;
  std::vector<std::size_t> dilations{1, 2, 4, 1, 2, 4};
  std::size_t lstm_hidden = 128;
  CoeffDims coeff_dims;
  std::uint64_t seed = 0;
  // Feed each predicted frame back as extra input to the first recurrent
  // layer (the reference frame seeds step 0). Off by default.
  bool autoregressive = false;

  bool operator==(const ModelConfig&) const = default;
};

void validate(const ModelConfig& config);

/// Dilation schedule {1, 2, 4} repeated `stacks` times.
std::vector<std::size_t> default_dilations(std::size_t stacks);

/// 1 + (K - 1) * sum(dilations): timesteps visible to one output of the stack.
std::size_t receptive_field(std::size_t kernel_size, const std::vector<std::size_t>& dilations);

/// Learnable scalar count implied by a config.
std::size_t parameter_count(const ModelConfig& config);

// Parameter layout, shared by stored tensors (P = Tensor) and tape-bound
// handles (P = Var).

template <class P>
struct Dense {
  P weight;
  P bias;
};

template <class P>
struct WaveNetLayerParams {
  Dense<P> filter;    // [R x R x K]
  Dense<P> gate;      // [R x R x K]
  Dense<P> residual;  // [R x R x 1]
  Dense<P> skip;      // [S x R x 1]
  std::size_t dilation = 1;
};

template <class P>
struct LstmParams {
  P input_weight;   // [4H x In], gate order: input, forget, candidate, output
  P hidden_weight;  // [4H x H]
  P bias;           // [4H]
};

template <class P>
struct ModelParams {
  Dense<P> input;  // [R x in_dim x 1]
  std::vector<WaveNetLayerParams<P>> layers;
  Dense<P> post1;  // [S x S x 1]
  Dense<P> post2;  // [S x S x 1]
  std::array<LstmParams<P>, 2> lstm;
  std::array<Dense<P>, 2> reference;  // [H x Dc]
  Dense<P> head;                      // [Dc x H]
};

/// Calls f(name, member...) for every learnable tensor, in a fixed order,
/// across one or more parameter structs with identical layer counts.
template <class F, class First, class... Rest>
void visit_parameters(F&& f, First& first, Rest&... rest) {
  f("input.weight", first.input.weight, rest.input.weight...);
  f("input.bias", first.input.bias, rest.input.bias...);
  for (std::size_t i = 0; i < first.layers.size(); ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    f(p + "filter.weight", first.layers[i].filter.weight, rest.layers[i].filter.weight...);
    f(p + "filter.bias", first.layers[i].filter.bias, rest.layers[i].filter.bias...);
    f(p + "gate.weight", first.layers[i].gate.weight, rest.layers[i].gate.weight...);
    f(p + "gate.bias", first.layers[i].gate.bias, rest.layers[i].gate.bias...);
    f(p + "residual.weight", first.layers[i].residual.weight, rest.layers[i].residual.weight...);
    f(p + "residual.bias", first.layers[i].residual.bias, rest.layers[i].residual.bias...);
    f(p + "skip.weight", first.layers[i].skip.weight, rest.layers[i].skip.weight...);
    f(p + "skip.bias", first.layers[i].skip.bias, rest.layers[i].skip.bias...);
  }
  f("post1.weight", first.post1.weight, rest.post1.weight...);
  f("post1.bias", first.post1.bias, rest.post1.bias...);
  f("post2.weight", first.post2.weight, rest.post2.weight...);
  f("post2.bias", first.post2.bias, rest.post2.bias...);
  for (std::size_t l = 0; l < 2; ++l) {
    const std::string p = "lstm." + std::to_string(l) + ".";
    f(p + "input_weight", first.lstm[l].input_weight, rest.lstm[l].input_weight...);
    f(p + "hidden_weight", first.lstm[l].hidden_weight, rest.lstm[l].hidden_weight...);
    f(p + "bias", first.lstm[l].bias, rest.lstm[l].bias...);
  }
  for (std::size_t l = 0; l < 2; ++l) {
    const std::string p = "reference." + std::to_string(l) + ".";
    f(p + "weight", first.reference[l].weight, rest.reference[l].weight...);
    f(p + "bias", first.reference[l].bias, rest.reference[l].bias...);
  }
  f("head.weight", first.head.weight, rest.head.weight...);
  f("head.bias", first.head.bias, rest.head.bias...);
}

/// Per-feature affine normalisation applied before the convolution stack:
/// x' = (x - shift) / scale. Fitted from training data, not learned.
struct FeatureNormalizer {
  std::vector<double> shift = std::vector<double>(kFeatureDim, 0.0);
  std::vector<double> scale = std::vector<double>(kFeatureDim, 1.0);

  bool operator==(const FeatureNormalizer&) const = default;
};

/// Dilated causal convolution stack feeding a two-layer LSTM decoder whose
/// initial hidden states are embedded from a reference listener frame.
struct ListenerHeadModel {
  ModelConfig config;
  ModelParams<Tensor> params;
  FeatureNormalizer normalizer;
};

/// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights; zero biases
/// except the LSTM forget-gate bias, which starts at 1.
ListenerHeadModel init_params(const ModelConfig& config);

std::vector<std::string> parameter_names(const ModelParams<Tensor>& params);
std::vector<Tensor> flatten(const ModelParams<Tensor>& params);
/// Replaces tensors in visit order; shapes must match.
void assign(ModelParams<Tensor>& params, std::vector<Tensor> values);

/// Binds every parameter to `tape` (as gradient-tracked leaves when
/// `trainable`). `order`, if given, receives the leaves in visit order.
ModelParams<Var> bind_parameters(Tape& tape, const ModelParams<Tensor>& params, bool trainable,
                      std::vector<Var>* order = nullptr);

/// Structure of `params` filled with caller-owned leaves, in visit order.
ModelParams<Var> bind_parameters(const ModelParams<Tensor>& params, std::span<const Var> leaves);

// Differentiable forward pieces.

struct BlockOutput {
  Var residual;
  Var skip;
};

BlockOutput wavenet_block(const WaveNetLayerParams<Var>& layer, Var x);

/// features [in_dim x T] -> deep features [S x T].
Var wavenet_forward(const ModelParams<Var>& params, Var features);

struct RecurrentState {
  std::array<Var, 2> hidden;
  std::array<Var, 2> cell;
};

RecurrentState embed_reference(const ModelParams<Var>& params, Var reference);

/// deep [S x T] + reference [Dc] -> coefficients [T x Dc].
Var decode_sequence(const ModelParams<Var>& params, const ModelConfig& config, Var deep,
                    Var reference);

/// Full model on prepared input [in_dim x T] -> [T x Dc].
Var forward(const ModelParams<Var>& params, const ModelConfig& config, Var features,
            Var reference);

// Value-level entry points.

struct BlockValues {
  Tensor residual;
  Tensor skip;
};

BlockValues wavenet_block(const WaveNetLayerParams<Tensor>& layer, const Tensor& x);
Tensor wavenet_forward(const ListenerHeadModel& model, const Tensor& features);
std::pair<std::array<Tensor, 2>, std::array<Tensor, 2>> embed_reference(
    const ListenerHeadModel& model, const CoeffFrame& reference);
CoeffSequence decode_sequence(const ListenerHeadModel& model, const Tensor& deep,
                              const CoeffFrame& reference);

/// Normalises [T x 45] feature rows and transposes them to [45 x T].
Tensor prepare_input(const ListenerHeadModel& model, const AcousticFeatures& features);

/// decode_sequence(wavenet_forward(features), reference).
CoeffSequence predict(const ListenerHeadModel& model, const AcousticFeatures& features,
                      const CoeffFrame& reference);

}  // namespace listenhead
