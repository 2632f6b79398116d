// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "listenhead/autodiff.hpp"
#include "listenhead/tensor.hpp"

namespace listenhead {

struct GradCheckReport {
  // Largest per-tensor error |a - n|_2 / max(|a|_2, |n|_2, 1e-8).
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  // Largest per-entry error; see grad_check.
  double max_entry_error = 0.0;
  std::size_t worst_param = 0;  // tensor holding the worst entry
  std::size_t worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
  bool pass = false;
};

/// Builds a scalar on `tape` from parameter leaves bound in the given order.
using TapedFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares tape gradients of `f` against central differences
/// (f(p+eps) - f(p-eps)) / 2eps for every parameter entry. The check passes
/// iff max_relative_error (per tensor) < `tolerance`. The per-entry error
/// |a - n| / max(|a|, |n|, 1e-8) is reported too, but entries far below the
/// difference quotient's roundoff floor (about 1e-16 |f| / eps) make it a
/// diagnostic rather than a verdict. Throws NumericError if two identical
/// evaluations disagree.
GradCheckReport grad_check(const TapedFunction& f, const std::vector<Tensor>& params,
                           double epsilon, double tolerance);

/// Same comparison against caller-supplied analytic gradients.
GradCheckReport compare_gradients(const TapedFunction& f, const std::vector<Tensor>& params,
                                  const std::vector<Tensor>& analytic, double epsilon,
                                  double tolerance);

/// Evaluates `f` once without keeping the tape.
double evaluate(const TapedFunction& f, const std::vector<Tensor>& params);

}  // namespace listenhead
