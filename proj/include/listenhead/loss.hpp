// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "listenhead/autodiff.hpp"
#include "listenhead/model.hpp"
#include "listenhead/tensor.hpp"

namespace listenhead {

struct LossOptions {
  // Also penalise inter-frame change of the pose angle, not just translation.
  bool motion_on_angle = false;
};

/// Per-term sums over all frames; total is their sum.
struct LossBreakdown {
  double angle = 0.0;
  double translation = 0.0;
  double expression = 0.0;
  double motion = 0.0;
  double total = 0.0;
};

/// mu(x)_t = x_t - x_{t-1}, with mu(x)_0 = 0. Input and output are [T x D].
Tensor inter_frame_delta(const Tensor& sequence);

struct TapedLoss {
  Var total;
  LossBreakdown terms;
};

/// Sum over frames of the Euclidean (not squared) distances between the
/// angle, translation and expression groups, plus the distance between the
/// inter-frame changes of translation.
TapedLoss coefficient_loss(Var prediction, const Tensor& target, const CoeffDims& dims,
                           const LossOptions& options = {});

LossBreakdown coefficient_loss(const CoeffSequence& prediction, const CoeffSequence& target,
                               const LossOptions& options = {});

}  // namespace listenhead
