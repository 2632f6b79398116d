// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "listenhead/tensor.hpp"

// Value-only kernels. Differentiable versions live in autodiff.hpp and call
// into these for their forward pass.
namespace listenhead::ops {

/// Causal dilated 1-D convolution over a channel-major sequence.
///
/// input [C_in x T], weights [C_out x C_in x K], bias [C_out]. Tap k reads
/// input time t - k*dilation; taps before time 0 contribute zero, so the
/// output keeps length T and output time t never sees input after t.
Tensor conv1d_causal_dilated(const Tensor& input, const Tensor& weights,
                             const Tensor& bias, std::size_t dilation);

/// weight [D_out x D_in] * input [D_in] + bias [D_out].
Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// tanh(filter) * sigmoid(gate), elementwise.
Tensor gated_activation(const Tensor& filter, const Tensor& gate);

double sigmoid(double x);

}  // namespace listenhead::ops
