// SPDX-License-Identifier: Apache-2.0
#include "listenhead/ops.hpp"

#include <cmath>
#include <string>

#include "listenhead/error.hpp"

namespace listenhead::ops {

double sigmoid(double x) {
  // Split on sign so exp never overflows.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor conv1d_causal_dilated(const Tensor& input, const Tensor& weights,
                             const Tensor& bias, std::size_t dilation) {
  if (input.rank() != 2 || weights.rank() != 3 || bias.rank() != 1)
    throw ContractError("conv1d: expected input [C x T], weights [O x C x K], bias [O]");
  const std::size_t c_in = input.dim(0), steps = input.dim(1);
  const std::size_t c_out = weights.dim(0), taps = weights.dim(2);
  if (weights.dim(1) != c_in)
    throw ContractError("conv1d: weights expect " + std::to_string(weights.dim(1)) +
                        " input channels, got " + std::to_string(c_in));
  if (bias.dim(0) != c_out) throw ContractError("conv1d: bias length mismatch");
  if (dilation < 1 || taps < 1 || steps < 1)
    throw ContractError("conv1d: dilation, kernel size and length must be >= 1");

  const auto x = input.data();
  const auto w = weights.data();
  std::vector<double> out(c_out * steps);
  for (std::size_t o = 0; o < c_out; ++o) {
    double* row = out.data() + o * steps;
    for (std::size_t t = 0; t < steps; ++t) row[t] = bias[o];
    for (std::size_t c = 0; c < c_in; ++c) {
      const double* xr = x.data() + c * steps;
      for (std::size_t k = 0; k < taps; ++k) {
        const double wk = w[(o * c_in + c) * taps + k];
        const std::size_t shift = k * dilation;
        for (std::size_t t = shift; t < steps; ++t) row[t] += wk * xr[t - shift];
      }
    }
  }
  return Tensor::unchecked({c_out, steps}, std::move(out));
}

Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 1 || weight.rank() != 2 || bias.rank() != 1)
    throw ContractError("affine: expected input [D_in], weight [D_out x D_in], bias [D_out]");
  const std::size_t d_in = input.dim(0), d_out = weight.dim(0);
  if (weight.dim(1) != d_in || bias.dim(0) != d_out)
    throw ContractError("affine: weight " + shape_string(weight.shape()) +
                        " incompatible with input " + shape_string(input.shape()) +
                        " / bias " + shape_string(bias.shape()));
  std::vector<double> out(d_out);
  for (std::size_t i = 0; i < d_out; ++i) {
    double acc = bias[i];
    for (std::size_t j = 0; j < d_in; ++j) acc += weight[i * d_in + j] * input[j];
    out[i] = acc;
  }
  return Tensor::unchecked({d_out}, std::move(out));
}

Tensor gated_activation(const Tensor& filter, const Tensor& gate) {
  if (filter.shape() != gate.shape())
    throw ContractError("gated_activation: filter " + shape_string(filter.shape()) +
                        " and gate " + shape_string(gate.shape()) + " differ");
  std::vector<double> out(filter.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::tanh(filter[i]) * sigmoid(gate[i]);
  return Tensor::unchecked(filter.shape(), std::move(out));
}

}  // namespace listenhead::ops
