// SPDX-License-Identifier: Apache-2.0
#include "listenhead/optimizer.hpp"

#include <cmath>

#include "listenhead/error.hpp"

namespace listenhead {

OptimizerState make_adam_state(std::span<const Tensor> params, const AdamConfig& hyper) {
  OptimizerState state;
  state.hyper = hyper;
  for (const Tensor& p : params) {
    state.first_moment.push_back(Tensor::zeros(p.shape()));
    state.second_moment.push_back(Tensor::zeros(p.shape()));
  }
  return state;
}

void optimizer_step(std::vector<Tensor>& params, std::span<const Tensor> grads,
                    OptimizerState& state, std::span<const std::string> names) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw ContractError("optimizer_step: parameter, gradient and moment counts differ");
  const auto label = [&](std::size_t i) {
    return i < names.size() ? names[i] : "#" + std::to_string(i);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape() || state.first_moment[i].shape() != params[i].shape())
      throw ContractError("optimizer_step: shape mismatch for parameter " + label(i));
    if (!all_finite(grads[i].data()))
      throw NumericError("non-finite gradient for parameter " + label(i));
  }

  const AdamConfig& h = state.hyper;
  const std::uint64_t step = state.step + 1;
  const double correction1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<double> p = params[i].values();
    std::vector<double> m = state.first_moment[i].values();
    std::vector<double> v = state.second_moment[i].values();
    const auto g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
    params[i] = Tensor(params[i].shape(), std::move(p));
    state.first_moment[i] = Tensor(params[i].shape(), std::move(m));
    state.second_moment[i] = Tensor(params[i].shape(), std::move(v));
  }
  state.step = step;
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double ss = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data()) ss += v * v;
  const double norm = std::sqrt(ss);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor& g : grads) {
      std::vector<double> scaled = g.values();
      for (double& v : scaled) v *= factor;
      g = Tensor(g.shape(), std::move(scaled));
    }
  }
  return norm;
}

}  // namespace listenhead
