// SPDX-License-Identifier: Apache-2.0
#include "listenhead/loss.hpp"

#include <array>

#include "listenhead/error.hpp"

namespace listenhead {

Tensor inter_frame_delta(const Tensor& sequence) {
  if (sequence.rank() != 2 || sequence.dim(0) < 1)
    throw ContractError("inter_frame_delta: expected [T x D] with T >= 1");
  const std::size_t rows = sequence.dim(0), cols = sequence.dim(1);
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t t = 1; t < rows; ++t)
    for (std::size_t j = 0; j < cols; ++j) out[t * cols + j] = sequence.at(t, j) - sequence.at(t - 1, j);
  return Tensor(sequence.shape(), std::move(out));
}

TapedLoss coefficient_loss(Var prediction, const Tensor& target, const CoeffDims& dims,
                           const LossOptions& options) {
  const Tensor& pred = prediction.value();
  if (pred.rank() != 2 || pred.dim(1) != dims.total())
    throw ContractError("coefficient_loss: prediction must be [T x " +
                        std::to_string(dims.total()) + "], got " + shape_string(pred.shape()));
  if (target.shape() != pred.shape())
    throw ContractError("coefficient_loss: prediction " + shape_string(pred.shape()) +
                        " and target " + shape_string(target.shape()) + " differ");

  Tape& tape = prediction.tape();
  const Var gt = tape.constant(target);
  const Var diff = sub(prediction, gt);
  const Var motion_diff = sub(frame_delta(prediction), frame_delta(gt));

  const std::size_t a0 = dims.angle_begin(), c0 = dims.translation_begin();
  const std::size_t p0 = dims.expression_begin(), end = dims.total();
  const Var angle = sum(row_norms(diff, a0, c0));
  const Var translation = sum(row_norms(diff, c0, p0));
  const Var expression = sum(row_norms(diff, p0, end));
  Var motion = sum(row_norms(motion_diff, c0, p0));
  if (options.motion_on_angle) motion = add(motion, sum(row_norms(motion_diff, a0, c0)));

  const std::array<Var, 4> terms{angle, translation, expression, motion};
  TapedLoss out;
  out.total = add_n(terms);
  out.terms = {angle.value()[0], translation.value()[0], expression.value()[0], motion.value()[0],
               out.total.value()[0]};
  return out;
}

LossBreakdown coefficient_loss(const CoeffSequence& prediction, const CoeffSequence& target,
                               const LossOptions& options) {
  if (prediction.dims != target.dims)
    throw ContractError("coefficient_loss: coefficient dims differ");
  if (prediction.frames() != target.frames())
    throw ContractError("coefficient_loss: sequence lengths differ (" +
                        std::to_string(prediction.frames()) + " vs " +
                        std::to_string(target.frames()) + ")");
  Tape tape;
  return coefficient_loss(tape.constant(prediction.values), target.values, prediction.dims, options)
      .terms;
}

}  // namespace listenhead
