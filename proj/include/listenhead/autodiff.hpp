// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "listenhead/tensor.hpp"

namespace listenhead {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Per-node gradient buffers produced by Tape::backward. Nodes the seed never
/// reached have an empty buffer and report exact zeros.
class Gradients {
 public:
  Gradients(const Tape& tape, std::vector<std::vector<double>> buffers)
      : tape_(&tape), buffers_(std::move(buffers)) {}

  Tensor of(Var v) const;
  bool reached(Var v) const { return !buffers_[v.id()].empty(); }

 private:
  const Tape* tape_;
  std::vector<std::vector<double>> buffers_;
};

/// Reverse-mode gradient tape. Every differentiable op appends one node
/// holding its output value and a closure that pushes the node's gradient into
/// its inputs; backward replays the closures in reverse append order.
class Tape {
 public:
  using GradBuffers = std::vector<std::vector<double>>;
  using BackwardFn = std::function<void(const Tape&, std::size_t self, GradBuffers&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is tracked.
  Var parameter(Tensor value);
  /// Leaf with no gradient (data, targets).
  Var constant(Tensor value);

  /// Appends an op result. The closure is dropped when no input needs a
  /// gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient of a single-element output with respect to every node.
  Gradients backward(Var output) const;

  /// Gradient buffer for `id`, zero-initialised on first touch. Returns an
  /// empty span for nodes that do not require a gradient.
  static std::span<double> grad_for(const Tape& tape, GradBuffers& buffers, std::size_t id);

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Differentiable ops. All operands must live on the same tape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_n(std::span<const Var> terms);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var gated_activation(Var filter, Var gate);
Var conv1d_causal_dilated(Var input, Var weights, Var bias, std::size_t dilation);
Var affine(Var input, Var weight, Var bias);
Var matvec(Var weight, Var input);
Var sum(Var a);
Var slice(Var v, std::size_t begin, std::size_t end);
Var concat(Var a, Var b);
Var column(Var matrix, std::size_t t);
Var stack_rows(std::span<const Var> rows);

/// Euclidean norm of columns [begin, end) of each row of a [T x D] matrix,
/// as a [T] vector. The gradient at an exactly-zero norm is taken as zero.
Var row_norms(Var matrix, std::size_t begin, std::size_t end);

/// Inter-frame change of a [T x D] matrix: row t minus row t-1, row 0 zero.
Var frame_delta(Var matrix);

}  // namespace listenhead
