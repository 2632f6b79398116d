// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "listenhead/error.hpp"
#include "listenhead/grad_check.hpp"
#include "listenhead/model.hpp"
#include "listenhead/train.hpp"
#include "oracles.hpp"

using namespace listenhead;
using testing::random_tensor;
using testing::tiny_config;

namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix matrix(const Tensor& t) {
  Matrix m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.at(i, j);
  return m;
}

std::vector<std::vector<std::vector<double>>> kernel(const Tensor& w) {
  std::vector<std::vector<std::vector<double>>> r(
      w.dim(0), std::vector<std::vector<double>>(w.dim(1), std::vector<double>(w.dim(2))));
  for (std::size_t o = 0; o < w.dim(0); ++o)
    for (std::size_t i = 0; i < w.dim(1); ++i)
      for (std::size_t k = 0; k < w.dim(2); ++k) r[o][i][k] = w[(o * w.dim(1) + i) * w.dim(2) + k];
  return r;
}

Matrix conv(const Matrix& x, const Dense<Tensor>& d, std::size_t dilation) {
  return oracle::causal_conv(x, kernel(d.weight), d.bias.values(), dilation);
}

// residual = x + W_r z, skip = W_s z, z = tanh(W_f * x) . sigmoid(W_g * x)
std::pair<Matrix, Matrix> block_loops(const WaveNetLayerParams<Tensor>& layer, const Matrix& x) {
  const Matrix f = conv(x, layer.filter, layer.dilation), g = conv(x, layer.gate, layer.dilation);
  Matrix z = f;
  for (std::size_t c = 0; c < z.size(); ++c)
    for (std::size_t t = 0; t < z[c].size(); ++t)
      z[c][t] = std::tanh(f[c][t]) * oracle::sigmoid(g[c][t]);
  Matrix residual = conv(z, layer.residual, 1);
  for (std::size_t c = 0; c < x.size(); ++c)
    for (std::size_t t = 0; t < x[c].size(); ++t) residual[c][t] += x[c][t];
  return {residual, conv(z, layer.skip, 1)};
}

std::vector<double> mat_vec(const Tensor& w, const std::vector<double>& x) {
  std::vector<double> y(w.dim(0), 0.0);
  for (std::size_t i = 0; i < w.dim(0); ++i)
    for (std::size_t j = 0; j < w.dim(1); ++j) y[i] += w.at(i, j) * x[j];
  return y;
}

// Two stacked LSTM cells, gate order input, forget, candidate, output.
Matrix decode_loops(const ListenerHeadModel& m, const Matrix& deep, const std::vector<double>& ref) {
  const std::size_t h = m.config.lstm_hidden, steps = deep[0].size();
  std::vector<double> hidden[2], cell[2];
  for (int l = 0; l < 2; ++l) {
    hidden[l] = mat_vec(m.params.reference[l].weight, ref);
    for (std::size_t i = 0; i < h; ++i)
      hidden[l][i] = std::tanh(hidden[l][i] + m.params.reference[l].bias[i]);
    cell[l].assign(h, 0.0);
  }
  Matrix out;
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<double> x(deep.size());
    for (std::size_t c = 0; c < deep.size(); ++c) x[c] = deep[c][t];
    for (int l = 0; l < 2; ++l) {
      const auto& p = m.params.lstm[l];
      const auto a = mat_vec(p.input_weight, x), b = mat_vec(p.hidden_weight, hidden[l]);
      for (std::size_t i = 0; i < h; ++i) {
        const auto gate = [&](std::size_t k) { return a[k * h + i] + b[k * h + i] + p.bias[k * h + i]; };
        const double in = oracle::sigmoid(gate(0)), forget = oracle::sigmoid(gate(1));
        const double cand = std::tanh(gate(2)), outg = oracle::sigmoid(gate(3));
        cell[l][i] = forget * cell[l][i] + in * cand;
      }
      for (std::size_t i = 0; i < h; ++i) {
        const auto gate = [&](std::size_t k) { return a[k * h + i] + b[k * h + i] + p.bias[k * h + i]; };
        hidden[l][i] = oracle::sigmoid(gate(3)) * std::tanh(cell[l][i]);
      }
      x = hidden[l];
    }
    auto y = mat_vec(m.params.head.weight, x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += m.params.head.bias[i];
    out.push_back(y);
  }
  return out;
}

ListenerHeadModel random_model(std::uint64_t seed, ModelConfig config = tiny_config()) {
  config.seed = seed;
  ListenerHeadModel m = init_params(config);
  Rng rng(seed + 100);
  testing::randomize(m, rng);
  return m;
}

}  // namespace

TEST_CASE("receptive field and dilation schedule") {
  CHECK(receptive_field(2, {1, 2, 4}) == 8);
  CHECK(receptive_field(3, {1, 2}) == 7);
  CHECK(receptive_field(1, {1, 2, 4}) == 1);
  CHECK(default_dilations(2) == std::vector<std::size_t>{1, 2, 4, 1, 2, 4});
}

TEST_CASE("parameter count formula matches the constructed tensors") {
  ModelConfig wide;
  wide.coeff_dims.expression = 10;
  ModelConfig feedback = tiny_config();
  feedback.autoregressive = true;
  ModelConfig odd = tiny_config();
  odd.kernel_size = 3;
  odd.dilations = {1, 3, 9};
  odd.skip_channels = 6;
  for (const ModelConfig& c : {tiny_config(), wide, feedback, odd}) {
    std::size_t total = 0;
    for (const Tensor& t : flatten(init_params(c).params)) total += t.size();
    CHECK(total == parameter_count(c));
  }
}

TEST_CASE("init_params: seeded, bounded by fan-in, zero biases except forget gate") {
  const ListenerHeadModel a = init_params(tiny_config(3)), b = init_params(tiny_config(3));
  const ListenerHeadModel c = init_params(tiny_config(4));
  CHECK(flatten(a.params) == flatten(b.params));
  CHECK(flatten(a.params) != flatten(c.params));

  const auto names = parameter_names(a.params);
  const auto tensors = flatten(a.params);
  const std::size_t h = 5;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const Tensor& t = tensors[i];
    CAPTURE(names[i]);
    if (t.rank() >= 2) {
      const double bound = 1.0 / std::sqrt(double(t.size() / t.dim(0)));
      for (double v : t.values()) CHECK((v > -bound && v < bound));
    } else if (names[i].starts_with("lstm.")) {
      for (std::size_t j = 0; j < t.size(); ++j) CHECK(t[j] == (j >= h && j < 2 * h ? 1.0 : 0.0));
    } else {
      for (double v : t.values()) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("config validation") {
  ModelConfig c = tiny_config();
  c.dilations = {};
  CHECK_THROWS_AS(validate(c), ContractError);
  c = tiny_config();
  c.dilations = {1, 0};
  CHECK_THROWS_AS(validate(c), ContractError);
  c = tiny_config();
  c.lstm_hidden = 0;
  CHECK_THROWS_AS(init_params(c), ContractError);
}

TEST_CASE("wavenet block: zero projections pass the input through") {
  ListenerHeadModel m = init_params(tiny_config());
  WaveNetLayerParams<Tensor> layer = m.params.layers[1];
  for (auto* d : {&layer.filter, &layer.gate, &layer.residual, &layer.skip}) {
    d->weight = Tensor::zeros(d->weight.shape());
    d->bias = Tensor::zeros(d->bias.shape());
  }
  Rng rng(1);
  const Tensor x = random_tensor(rng, {4, 7});
  const BlockValues out = wavenet_block(layer, x);
  CHECK(out.residual == x);
  for (double v : out.skip.values()) CHECK(v == 0.0);
}

TEST_CASE("wavenet block matches the loop evaluation and is causal") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ListenerHeadModel m = random_model(seed);
    Rng rng(seed);
    const Tensor x = random_tensor(rng, {4, 9});
    for (const auto& layer : m.params.layers) {
      const BlockValues got = wavenet_block(layer, x);
      const auto [residual, skip] = block_loops(layer, matrix(x));
      for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t t = 0; t < 9; ++t) {
          CHECK(got.residual.at(c, t) == doctest::Approx(residual[c][t]).epsilon(1e-12));
          CHECK(got.skip.at(c, t) == doctest::Approx(skip[c][t]).epsilon(1e-12));
        }
      for (std::size_t t = 0; t < 9; ++t) {
        std::vector<double> v = x.values();
        v[2 * 9 + t] += 0.75;
        const BlockValues moved = wavenet_block(layer, Tensor({4, 9}, v));
        for (std::size_t c = 0; c < 4; ++c)
          for (std::size_t s = 0; s < t; ++s) CHECK(moved.residual.at(c, s) == got.residual.at(c, s));
      }
    }
  }
}

TEST_CASE("wavenet stack: length preserved, last-step perturbation is local") {
  const ListenerHeadModel m = random_model(7);
  Rng rng(7);
  CHECK(wavenet_forward(m, random_tensor(rng, {45, 1})).shape() == Shape{4, 1});
  const Tensor x = random_tensor(rng, {45, 6});
  const Tensor base = wavenet_forward(m, x);
  std::vector<double> v = x.values();
  for (std::size_t c = 0; c < 45; ++c) v[c * 6 + 5] += 1.0;
  const Tensor moved = wavenet_forward(m, Tensor({45, 6}, v));
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t t = 0; t < 5; ++t) CHECK(moved.at(c, t) == base.at(c, t));
  }
  bool last_changed = false;
  for (std::size_t c = 0; c < 4; ++c) last_changed |= moved.at(c, 5) != base.at(c, 5);
  CHECK(last_changed);
}

TEST_CASE("reference embedding") {
  ListenerHeadModel m = random_model(2);
  Rng rng(2);
  const CoeffFrame r1 = testing::random_frame(rng, m.config.coeff_dims);
  const CoeffFrame r2 = testing::random_frame(rng, m.config.coeff_dims);
  const auto [h1, c1] = embed_reference(m, r1);
  const auto [h2, c2] = embed_reference(m, r2);
  for (int l = 0; l < 2; ++l) {
    CHECK(h1[l].size() == 5);
    CHECK(c1[l].size() == 5);
    CHECK(h1[l] != h2[l]);
  }
  for (auto& d : m.params.reference) {
    d.weight = Tensor::zeros(d.weight.shape());
    d.bias = Tensor::zeros(d.bias.shape());
  }
  const auto [h0, c0] = embed_reference(m, r1);
  for (int l = 0; l < 2; ++l) {
    for (double v : h0[l].values()) CHECK(v == 0.0);
    for (double v : c0[l].values()) CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(embed_reference(m, CoeffFrame::from_flat(std::vector<double>(7, 0.0), {3, 3, 1})),
                  ContractError);
}

TEST_CASE("decoder: frame count, constant collapse and per-gate loops") {
  ListenerHeadModel m = random_model(3);
  Rng rng(3);
  const CoeffFrame ref = testing::random_frame(rng, m.config.coeff_dims);
  const Tensor deep = random_tensor(rng, {4, 4});
  const CoeffSequence out = decode_sequence(m, deep, ref);
  REQUIRE(out.frames() == 4);
  const Matrix expected = decode_loops(m, matrix(deep), ref.flat());
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t j = 0; j < 10; ++j)
      CHECK(out.values.at(t, j) == doctest::Approx(expected[t][j]).epsilon(1e-12));

  for (auto& cell : m.params.lstm) {
    cell.input_weight = Tensor::zeros(cell.input_weight.shape());
    cell.hidden_weight = Tensor::zeros(cell.hidden_weight.shape());
    cell.bias = Tensor::zeros(cell.bias.shape());
  }
  m.params.head.weight = Tensor::zeros(m.params.head.weight.shape());
  const Tensor b = m.params.head.bias;
  const CoeffSequence flat = decode_sequence(m, random_tensor(rng, {4, 6}), ref);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t j = 0; j < 10; ++j) CHECK(flat.values.at(t, j) == b[j]);
}

TEST_CASE("predict is deterministic, length preserving and causal") {
  for (bool feedback : {false, true}) {
    ModelConfig c = tiny_config();
    c.autoregressive = feedback;
    const ListenerHeadModel m = random_model(11, c);
    Rng rng(11);
    const AcousticFeatures f = testing::random_features(rng, 8);
    const CoeffFrame ref = testing::random_frame(rng, c.coeff_dims);
    const CoeffSequence base = predict(m, f, ref);
    CHECK(base.frames() == 8);
    CHECK(predict(m, f, ref).values == base.values);
    for (std::size_t t = 0; t < 8; ++t) {
      std::vector<double> v = f.rows.values();
      for (std::size_t j = t * 45; j < 8 * 45; ++j) v[j] += rng.symmetric(1.0);
      const CoeffSequence moved = predict(m, {Tensor({8, 45}, v)}, ref);
      for (std::size_t s = 0; s < t; ++s)
        for (std::size_t j = 0; j < 10; ++j) CHECK(moved.values.at(s, j) == base.values.at(s, j));
    }
  }
}

TEST_CASE("full model gradient passes the finite-difference check") {
  ModelGradCheck check;
  check.model = tiny_config();
  for (std::uint64_t seed : {0, 1, 2}) {
    const GradCheckReport r = check_model_gradients(check, seed);
    CAPTURE(seed);
    CHECK(r.pass);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.entries_checked == parameter_count(check.model));
  }
}
