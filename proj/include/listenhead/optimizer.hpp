// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "listenhead/tensor.hpp"

namespace listenhead {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

struct OptimizerState {
  std::string algorithm = "adam";
  std::uint64_t step = 0;
  AdamConfig hyper;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  bool operator==(const OptimizerState&) const = default;
};

/// Zeroed moments shaped like `params`.
OptimizerState make_adam_state(std::span<const Tensor> params, const AdamConfig& hyper);

/// One bias-corrected Adam update in place. `names` label parameters in
/// diagnostics; a non-finite gradient throws NumericError naming it.
void optimizer_step(std::vector<Tensor>& params, std::span<const Tensor> grads,
                    OptimizerState& state, std::span<const std::string> names = {});

/// Scales all gradients so their joint L2 norm is at most max_norm. Returns
/// the norm before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

}  // namespace listenhead
