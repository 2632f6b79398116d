// SPDX-License-Identifier: Apache-2.0
#include "listenhead/model.hpp"

#include <cmath>
#include <numeric>

#include "listenhead/error.hpp"
#include "listenhead/rng.hpp"

namespace listenhead {

std::vector<double> CoeffFrame::flat() const {
  std::vector<double> out(angle);
  out.insert(out.end(), translation.begin(), translation.end());
  out.insert(out.end(), expression.begin(), expression.end());
  return out;
}

CoeffFrame CoeffFrame::from_flat(std::span<const double> values, const CoeffDims& dims) {
  if (values.size() != dims.total())
    throw ContractError("coefficient frame has " + std::to_string(values.size()) +
                        " values, expected " + std::to_string(dims.total()));
  const auto* p = values.data();
  CoeffFrame f;
  f.angle.assign(p, p + dims.angle);
  f.translation.assign(p + dims.angle, p + dims.angle + dims.translation);
  f.expression.assign(p + dims.expression_begin(), p + dims.total());
  return f;
}

CoeffFrame CoeffSequence::frame(std::size_t t) const {
  if (t >= frames()) throw ContractError("frame index " + std::to_string(t) + " out of range");
  const std::size_t w = dims.total();
  return CoeffFrame::from_flat(values.data().subspan(t * w, w), dims);
}

void validate(const ModelConfig& c) {
  const auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ContractError(std::string("model.") + name + " must be >= 1");
  };
  positive(c.in_dim, "in_dim");
  positive(c.residual_channels, "residual_channels");
  positive(c.skip_channels, "skip_channels");
  positive(c.kernel_size, "kernel_size");
  positive(c.lstm_hidden, "lstm_hidden");
  positive(c.coeff_dims.angle, "angle_dim");
  positive(c.coeff_dims.translation, "translation_dim");
  positive(c.coeff_dims.expression, "expression_dim");
  if (c.dilations.empty()) throw ContractError("model.dilations must not be empty");
  for (std::size_t d : c.dilations)
    if (d < 1) throw ContractError("model.dilations entries must be >= 1");
}

std::vector<std::size_t> default_dilations(std::size_t stacks) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < stacks; ++s) out.insert(out.end(), {1, 2, 4});
  return out;
}

std::size_t receptive_field(std::size_t kernel_size, const std::vector<std::size_t>& dilations) {
  return 1 + (kernel_size - 1) * std::accumulate(dilations.begin(), dilations.end(), std::size_t{0});
}

std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t r = c.residual_channels, s = c.skip_channels, k = c.kernel_size;
  const std::size_t h = c.lstm_hidden, dc = c.coeff_dims.total();
  const std::size_t lstm_in = s + (c.autoregressive ? dc : 0);
  const std::size_t per_layer = 2 * (r * r * k + r) + (r * r + r) + (s * r + s);
  return (r * c.in_dim + r) + c.dilations.size() * per_layer + 2 * (s * s + s) +
         (4 * h * lstm_in + 4 * h * h + 4 * h) + (4 * h * h + 4 * h * h + 4 * h) +
         2 * (h * dc + h) + (dc * h + dc);
}

namespace {

Dense<Tensor> zero_dense(Shape weight, std::size_t out) {
  return {Tensor::zeros(std::move(weight)), Tensor::zeros({out})};
}

ModelParams<Tensor> zero_params(const ModelConfig& c) {
  const std::size_t r = c.residual_channels, s = c.skip_channels, k = c.kernel_size;
  const std::size_t h = c.lstm_hidden, dc = c.coeff_dims.total();
  ModelParams<Tensor> p;
  p.input = zero_dense({r, c.in_dim, 1}, r);
  for (std::size_t d : c.dilations) {
    WaveNetLayerParams<Tensor> layer;
    layer.filter = zero_dense({r, r, k}, r);
    layer.gate = zero_dense({r, r, k}, r);
    layer.residual = zero_dense({r, r, 1}, r);
    layer.skip = zero_dense({s, r, 1}, s);
    layer.dilation = d;
    p.layers.push_back(std::move(layer));
  }
  p.post1 = zero_dense({s, s, 1}, s);
  p.post2 = zero_dense({s, s, 1}, s);
  const std::size_t lstm_in[2] = {s + (c.autoregressive ? dc : 0), h};
  for (std::size_t l = 0; l < 2; ++l) {
    p.lstm[l] = {Tensor::zeros({4 * h, lstm_in[l]}), Tensor::zeros({4 * h, h}),
                 Tensor::zeros({4 * h})};
    p.reference[l] = zero_dense({h, dc}, h);
  }
  p.head = zero_dense({dc, h}, dc);
  return p;
}

bool is_lstm_bias(const std::string& name) {
  return name.rfind("lstm.", 0) == 0 && name.ends_with(".bias");
}

}  // namespace

ListenerHeadModel init_params(const ModelConfig& config) {
  validate(config);
  ListenerHeadModel model{config, zero_params(config), {}};
  Rng rng(config.seed);
  const std::size_t h = config.lstm_hidden;
  visit_parameters(
      [&](const std::string& name, Tensor& t) {
        std::vector<double> values(t.size(), 0.0);
        if (t.rank() >= 2) {
          std::size_t fan_in = 1;
          for (std::size_t a = 1; a < t.rank(); ++a) fan_in *= t.dim(a);
          const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
          for (double& v : values) v = rng.symmetric(bound);
        } else if (is_lstm_bias(name)) {
          for (std::size_t i = h; i < 2 * h; ++i) values[i] = 1.0;
        }
        t = Tensor(t.shape(), std::move(values));
      },
      model.params);
  return model;
}

std::vector<std::string> parameter_names(const ModelParams<Tensor>& params) {
  std::vector<std::string> names;
  visit_parameters([&](const std::string& name, const Tensor&) { names.push_back(name); }, params);
  return names;
}

std::vector<Tensor> flatten(const ModelParams<Tensor>& params) {
  std::vector<Tensor> out;
  visit_parameters([&](const std::string&, const Tensor& t) { out.push_back(t); }, params);
  return out;
}

void assign(ModelParams<Tensor>& params, std::vector<Tensor> values) {
  std::size_t i = 0;
  visit_parameters(
      [&](const std::string& name, Tensor& t) {
        if (i >= values.size()) throw ContractError("assign: too few tensors");
        if (values[i].shape() != t.shape())
          throw ContractError("assign: shape mismatch for " + name + ": expected " +
                              shape_string(t.shape()) + ", got " +
                              shape_string(values[i].shape()));
        t = std::move(values[i++]);
      },
      params);
  if (i != values.size()) throw ContractError("assign: too many tensors");
}

ModelParams<Var> bind_parameters(Tape& tape, const ModelParams<Tensor>& params, bool trainable,
                      std::vector<Var>* order) {
  ModelParams<Var> bound;
  bound.layers.resize(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i)
    bound.layers[i].dilation = params.layers[i].dilation;
  visit_parameters(
      [&](const std::string&, const Tensor& t, Var& v) {
        v = trainable ? tape.parameter(t) : tape.constant(t);
        if (order) order->push_back(v);
      },
      params, bound);
  return bound;
}

ModelParams<Var> bind_parameters(const ModelParams<Tensor>& params, std::span<const Var> leaves) {
  ModelParams<Var> bound;
  bound.layers.resize(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i)
    bound.layers[i].dilation = params.layers[i].dilation;
  std::size_t next = 0;
  visit_parameters(
      [&](const std::string& name, const Tensor& t, Var& v) {
        if (next >= leaves.size()) throw ContractError("bind: too few leaves");
        v = leaves[next++];
        if (v.shape() != t.shape())
          throw ContractError("bind: " + name + " expects " + shape_string(t.shape()) + ", got " +
                              shape_string(v.shape()));
      },
      params, bound);
  if (next != leaves.size()) throw ContractError("bind: too many leaves");
  return bound;
}

BlockOutput wavenet_block(const WaveNetLayerParams<Var>& layer, Var x) {
  const Var f = conv1d_causal_dilated(x, layer.filter.weight, layer.filter.bias, layer.dilation);
  const Var g = conv1d_causal_dilated(x, layer.gate.weight, layer.gate.bias, layer.dilation);
  const Var z = gated_activation(f, g);
  const Var res = conv1d_causal_dilated(z, layer.residual.weight, layer.residual.bias, 1);
  const Var skip = conv1d_causal_dilated(z, layer.skip.weight, layer.skip.bias, 1);
  return {add(x, res), skip};
}

Var wavenet_forward(const ModelParams<Var>& params, Var features) {
  Var x = conv1d_causal_dilated(features, params.input.weight, params.input.bias, 1);
  std::vector<Var> skips;
  skips.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    const BlockOutput out = wavenet_block(layer, x);
    x = out.residual;
    skips.push_back(out.skip);
  }
  Var y = relu(add_n(skips));
  y = relu(conv1d_causal_dilated(y, params.post1.weight, params.post1.bias, 1));
  return conv1d_causal_dilated(y, params.post2.weight, params.post2.bias, 1);
}

RecurrentState embed_reference(const ModelParams<Var>& params, Var reference) {
  RecurrentState state;
  for (std::size_t l = 0; l < 2; ++l) {
    const Dense<Var>& emb = params.reference[l];
    state.hidden[l] = tanh(affine(reference, emb.weight, emb.bias));
    state.cell[l] = reference.tape().constant(Tensor::zeros({emb.bias.value().size()}));
  }
  return state;
}

Var decode_sequence(const ModelParams<Var>& params, const ModelConfig& config, Var deep,
                    Var reference) {
  if (deep.value().rank() != 2 || deep.value().dim(0) != config.skip_channels)
    throw ContractError("decode_sequence: deep features must be [skip_channels x T], got " +
                        shape_string(deep.shape()));
  if (reference.value().size() != config.coeff_dims.total())
    throw ContractError("decode_sequence: reference frame has " +
                        std::to_string(reference.value().size()) + " values, expected " +
                        std::to_string(config.coeff_dims.total()));
  const std::size_t h = config.lstm_hidden;
  const std::size_t steps = deep.value().dim(1);
  RecurrentState state = embed_reference(params, reference);
  Var previous = reference;
  std::vector<Var> outputs;
  outputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Var x = column(deep, t);
    if (config.autoregressive) x = concat(x, previous);
    for (std::size_t l = 0; l < 2; ++l) {
      const LstmParams<Var>& cell = params.lstm[l];
      const Var gates =
          add(affine(x, cell.input_weight, cell.bias), matvec(cell.hidden_weight, state.hidden[l]));
      const Var in_gate = sigmoid(slice(gates, 0, h));
      const Var forget_gate = sigmoid(slice(gates, h, 2 * h));
      const Var candidate = tanh(slice(gates, 2 * h, 3 * h));
      const Var out_gate = sigmoid(slice(gates, 3 * h, 4 * h));
      state.cell[l] = add(mul(forget_gate, state.cell[l]), mul(in_gate, candidate));
      state.hidden[l] = mul(out_gate, tanh(state.cell[l]));
      x = state.hidden[l];
    }
    previous = affine(x, params.head.weight, params.head.bias);
    outputs.push_back(previous);
  }
  return stack_rows(outputs);
}

Var forward(const ModelParams<Var>& params, const ModelConfig& config, Var features,
            Var reference) {
  return decode_sequence(params, config, wavenet_forward(params, features), reference);
}

BlockValues wavenet_block(const WaveNetLayerParams<Tensor>& layer, const Tensor& x) {
  Tape tape;
  WaveNetLayerParams<Var> bound;
  bound.filter = {tape.constant(layer.filter.weight), tape.constant(layer.filter.bias)};
  bound.gate = {tape.constant(layer.gate.weight), tape.constant(layer.gate.bias)};
  bound.residual = {tape.constant(layer.residual.weight), tape.constant(layer.residual.bias)};
  bound.skip = {tape.constant(layer.skip.weight), tape.constant(layer.skip.bias)};
  bound.dilation = layer.dilation;
  const BlockOutput out = wavenet_block(bound, tape.constant(x));
  return {out.residual.value(), out.skip.value()};
}

Tensor wavenet_forward(const ListenerHeadModel& model, const Tensor& features) {
  if (features.rank() != 2 || features.dim(0) != model.config.in_dim)
    throw ContractError("wavenet_forward: features must be [" +
                        std::to_string(model.config.in_dim) + " x T], got " +
                        shape_string(features.shape()));
  Tape tape;
  const auto params = bind_parameters(tape, model.params, false);
  return wavenet_forward(params, tape.constant(features)).value();
}

std::pair<std::array<Tensor, 2>, std::array<Tensor, 2>> embed_reference(
    const ListenerHeadModel& model, const CoeffFrame& reference) {
  if (reference.dims() != model.config.coeff_dims)
    throw ContractError("embed_reference: reference frame dims do not match the model");
  Tape tape;
  const auto params = bind_parameters(tape, model.params, false);
  const RecurrentState s = embed_reference(params, tape.constant(Tensor::vector(reference.flat())));
  return {{s.hidden[0].value(), s.hidden[1].value()}, {s.cell[0].value(), s.cell[1].value()}};
}

CoeffSequence decode_sequence(const ListenerHeadModel& model, const Tensor& deep,
                              const CoeffFrame& reference) {
  if (reference.dims() != model.config.coeff_dims)
    throw ContractError("decode_sequence: reference frame dims do not match the model");
  Tape tape;
  const auto params = bind_parameters(tape, model.params, false);
  const Var out = decode_sequence(params, model.config, tape.constant(deep),
                                  tape.constant(Tensor::vector(reference.flat())));
  return {model.config.coeff_dims, out.value()};
}

Tensor prepare_input(const ListenerHeadModel& model, const AcousticFeatures& features) {
  const Tensor& rows = features.rows;
  if (rows.rank() != 2 || rows.dim(1) != kFeatureDim || model.config.in_dim != kFeatureDim)
    throw ContractError("prepare_input: expected [T x 45] features for a 45-input model");
  const std::size_t steps = rows.dim(0);
  const FeatureNormalizer& n = model.normalizer;
  std::vector<double> out(kFeatureDim * steps);
  for (std::size_t c = 0; c < kFeatureDim; ++c)
    for (std::size_t t = 0; t < steps; ++t)
      out[c * steps + t] = (rows.at(t, c) - n.shift[c]) / n.scale[c];
  return Tensor({kFeatureDim, steps}, std::move(out));
}

CoeffSequence predict(const ListenerHeadModel& model, const AcousticFeatures& features,
                      const CoeffFrame& reference) {
  if (reference.dims() != model.config.coeff_dims)
    throw ContractError("predict: reference frame dims do not match the model");
  Tape tape;
  const auto params = bind_parameters(tape, model.params, false);
  const Var out = forward(params, model.config, tape.constant(prepare_input(model, features)),
                          tape.constant(Tensor::vector(reference.flat())));
  return {model.config.coeff_dims, out.value()};
}

}  // namespace listenhead
