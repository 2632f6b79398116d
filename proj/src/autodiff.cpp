// SPDX-License-Identifier: Apache-2.0
#include "listenhead/autodiff.hpp"

#include <cmath>
#include <string>

#include "listenhead/error.hpp"
#include "listenhead/ops.hpp"

namespace listenhead {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(id_);
}

Tensor Gradients::of(Var v) const {
  const auto& buf = buffers_[v.id()];
  const Shape& shape = tape_->value(v.id()).shape();
  if (buf.empty()) return Tensor::zeros(shape);
  return Tensor::unchecked(shape, buf);
}

Var Tape::parameter(Tensor value) {
  nodes_.push_back(Node{std::move(value), true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw ContractError("operands recorded on different tapes");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), needs, needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_for(const Tape& tape, GradBuffers& buffers, std::size_t id) {
  if (!tape.requires_grad(id)) return {};
  auto& buf = buffers[id];
  if (buf.empty()) buf.assign(tape.value(id).size(), 0.0);
  return buf;
}

Gradients Tape::backward(Var output) const {
  if (&output.tape() != this) throw ContractError("backward: output belongs to another tape");
  if (output.value().size() != 1)
    throw ContractError("backward: seed must be a scalar, got shape " +
                        shape_string(output.shape()));
  GradBuffers buffers(nodes_.size());
  if (!nodes_[output.id()].requires_grad) return Gradients(*this, std::move(buffers));
  buffers[output.id()] = {1.0};
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (buffers[i].empty() || !node.backward) continue;
    node.backward(*this, i, buffers);
  }
  return Gradients(*this, std::move(buffers));
}

namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape())
    throw ContractError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                        shape_string(b.shape()) + " differ");
}

template <class F>
Var unary_map(Var a, F f, Tape::BackwardFn backward) {
  const Tensor& x = a.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return a.tape().record(Tensor::unchecked(x.shape(), std::move(out)), {a}, std::move(backward));
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  const Tensor &x = a.value(), &y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(Tensor::unchecked(x.shape(), std::move(out)), {a, b},
                         [ia, ib](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
                           std::span<const double> g = buf[self];
                           auto ga = Tape::grad_for(tape, buf, ia);
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                           auto gb = Tape::grad_for(tape, buf, ib);
                           for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i];
                         });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  const Tensor &x = a.value(), &y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(Tensor::unchecked(x.shape(), std::move(out)), {a, b},
                         [ia, ib](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
                           std::span<const double> g = buf[self];
                           auto ga = Tape::grad_for(tape, buf, ia);
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                           auto gb = Tape::grad_for(tape, buf, ib);
                           for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
                         });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  const Tensor &x = a.value(), &y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(Tensor::unchecked(x.shape(), std::move(out)), {a, b},
                         [ia, ib](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
                           std::span<const double> g = buf[self];
                           const Tensor &xa = tape.value(ia), &xb = tape.value(ib);
                           auto ga = Tape::grad_for(tape, buf, ia);
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * xb[i];
                           auto gb = Tape::grad_for(tape, buf, ib);
                           for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * xa[i];
                         });
}

Var scale(Var a, double factor) {
  const std::size_t ia = a.id();
  return unary_map(a, [factor](double x) { return x * factor; },
                   [ia, factor](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
                     std::span<const double> g = buf[self];
                     auto ga = Tape::grad_for(tape, buf, ia);
                     for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * factor;
                   });
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw ContractError("add_n: no terms");
  const Shape& shape = terms[0].shape();
  std::vector<double> out(terms[0].value().size(), 0.0);
  std::vector<std::size_t> ids;
  for (const Var& t : terms) {
    if (t.shape() != shape) throw ContractError("add_n: shape mismatch");
    const Tensor& v = t.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    ids.push_back(t.id());
  }
  return terms[0].tape().record(
      Tensor::unchecked(shape, std::move(out)), terms,
      [ids = std::move(ids)](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
        std::span<const double> g = buf[self];
        for (std::size_t id : ids) {
          auto gi = Tape::grad_for(tape, buf, id);
          for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
        }
      });
}

Var tanh(Var a) {
  const std::size_t ia = a.id();
  return unary_map(a, [](double x) { return std::tanh(x); },
                   [ia](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
                     std::span<const double> g = buf[self];
                     const Tensor& y = tape.value(self);
                     auto ga = Tape::grad_for(tape, buf, ia);
                     for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
                   });
}

Var sigmoid(Var a) {
  const std::size_t ia = a.id();
  return unary_map(a, [](double x) { return ops::sigmoid(x); },
                   [ia](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
                     std::span<const double> g = buf[self];
                     const Tensor& y = tape.value(self);
                     auto ga = Tape::grad_for(tape, buf, ia);
                     for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
                   });
}

Var relu(Var a) {
  const std::size_t ia = a.id();
  return unary_map(a, [](double x) { return x > 0 ? x : 0.0; },
                   [ia](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
                     std::span<const double> g = buf[self];
                     const Tensor& x = tape.value(ia);
                     auto ga = Tape::grad_for(tape, buf, ia);
                     for (std::size_t i = 0; i < ga.size(); ++i)
                       if (x[i] > 0) ga[i] += g[i];
                   });
}

Var gated_activation(Var filter, Var gate) {
  Tensor z = ops::gated_activation(filter.value(), gate.value());
  const std::size_t i_f = filter.id(), i_g = gate.id();
  return filter.tape().record(
      std::move(z), {filter, gate},
      [i_f, i_g](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
        std::span<const double> g = buf[self];
        const Tensor &xf = tape.value(i_f), &xg = tape.value(i_g);
        auto gf = Tape::grad_for(tape, buf, i_f);
        for (std::size_t i = 0; i < gf.size(); ++i) {
          const double th = std::tanh(xf[i]);
          gf[i] += g[i] * (1.0 - th * th) * ops::sigmoid(xg[i]);
        }
        auto gg = Tape::grad_for(tape, buf, i_g);
        for (std::size_t i = 0; i < gg.size(); ++i) {
          const double s = ops::sigmoid(xg[i]);
          gg[i] += g[i] * std::tanh(xf[i]) * s * (1.0 - s);
        }
      });
}

Var conv1d_causal_dilated(Var input, Var weights, Var bias, std::size_t dilation) {
  Tensor y = ops::conv1d_causal_dilated(input.value(), weights.value(), bias.value(), dilation);
  const std::size_t ix = input.id(), iw = weights.id(), ib = bias.id();
  return input.tape().record(
      std::move(y), {input, weights, bias},
      [ix, iw, ib, dilation](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
        std::span<const double> g = buf[self];
        const Tensor &x = tape.value(ix), &w = tape.value(iw);
        const std::size_t c_in = x.dim(0), steps = x.dim(1);
        const std::size_t c_out = w.dim(0), taps = w.dim(2);
        auto gb = Tape::grad_for(tape, buf, ib);
        if (!gb.empty())
          for (std::size_t o = 0; o < c_out; ++o)
            for (std::size_t t = 0; t < steps; ++t) gb[o] += g[o * steps + t];
        auto gw = Tape::grad_for(tape, buf, iw);
        auto gx = Tape::grad_for(tape, buf, ix);
        for (std::size_t o = 0; o < c_out; ++o) {
          const double* go = g.data() + o * steps;
          for (std::size_t c = 0; c < c_in; ++c) {
            for (std::size_t k = 0; k < taps; ++k) {
              const std::size_t widx = (o * c_in + c) * taps + k;
              const std::size_t shift = k * dilation;
              if (shift >= steps) continue;
              if (!gw.empty()) {
                double acc = 0.0;
                for (std::size_t t = shift; t < steps; ++t) acc += go[t] * x[c * steps + t - shift];
                gw[widx] += acc;
              }
              if (!gx.empty()) {
                const double wk = w[widx];
                double* gxr = gx.data() + c * steps;
                for (std::size_t t = shift; t < steps; ++t) gxr[t - shift] += go[t] * wk;
              }
            }
          }
        }
      });
}

Var affine(Var input, Var weight, Var bias) {
  Tensor y = ops::affine(input.value(), weight.value(), bias.value());
  const std::size_t ix = input.id(), iw = weight.id(), ib = bias.id();
  return input.tape().record(
      std::move(y), {input, weight, bias},
      [ix, iw, ib](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
        std::span<const double> g = buf[self];
        const Tensor &x = tape.value(ix), &w = tape.value(iw);
        const std::size_t d_out = w.dim(0), d_in = w.dim(1);
        auto gb = Tape::grad_for(tape, buf, ib);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i];
        auto gw = Tape::grad_for(tape, buf, iw);
        if (!gw.empty())
          for (std::size_t i = 0; i < d_out; ++i)
            for (std::size_t j = 0; j < d_in; ++j) gw[i * d_in + j] += g[i] * x[j];
        auto gx = Tape::grad_for(tape, buf, ix);
        if (!gx.empty())
          for (std::size_t i = 0; i < d_out; ++i)
            for (std::size_t j = 0; j < d_in; ++j) gx[j] += g[i] * w[i * d_in + j];
      });
}

Var matvec(Var weight, Var input) {
  const Tensor &w = weight.value(), &x = input.value();
  if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0))
    throw ContractError("matvec: weight " + shape_string(w.shape()) + " incompatible with input " +
                        shape_string(x.shape()));
  const std::size_t d_out = w.dim(0), d_in = w.dim(1);
  std::vector<double> out(d_out, 0.0);
  for (std::size_t i = 0; i < d_out; ++i)
    for (std::size_t j = 0; j < d_in; ++j) out[i] += w[i * d_in + j] * x[j];
  const std::size_t iw = weight.id(), ix = input.id();
  return weight.tape().record(
      Tensor::unchecked({d_out}, std::move(out)), {weight, input},
      [iw, ix, d_out, d_in](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
        std::span<const double> g = buf[self];
        const Tensor &x = tape.value(ix), &w = tape.value(iw);
        auto gw = Tape::grad_for(tape, buf, iw);
        if (!gw.empty())
          for (std::size_t i = 0; i < d_out; ++i)
            for (std::size_t j = 0; j < d_in; ++j) gw[i * d_in + j] += g[i] * x[j];
        auto gx = Tape::grad_for(tape, buf, ix);
        if (!gx.empty())
          for (std::size_t i = 0; i < d_out; ++i)
            for (std::size_t j = 0; j < d_in; ++j) gx[j] += g[i] * w[i * d_in + j];
      });
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::unchecked({1}, {acc}), {a},
                         [ia](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
                           const double g = buf[self][0];
                           auto ga = Tape::grad_for(tape, buf, ia);
                           for (double& v : ga) v += g;
                         });
}

Var slice(Var v, std::size_t begin, std::size_t end) {
  const Tensor& x = v.value();
  if (x.rank() != 1 || begin > end || end > x.size())
    throw ContractError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                        ") invalid for " + shape_string(x.shape()));
  std::vector<double> out(x.data().begin() + begin, x.data().begin() + end);
  const std::size_t iv = v.id();
  return v.tape().record(Tensor::unchecked({end - begin}, std::move(out)), {v},
                         [iv, begin](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
                           std::span<const double> g = buf[self];
                           auto gv = Tape::grad_for(tape, buf, iv);
                           for (std::size_t i = 0; i < g.size(); ++i) gv[begin + i] += g[i];
                         });
}

Var concat(Var a, Var b) {
  const Tensor &x = a.value(), &y = b.value();
  if (x.rank() != 1 || y.rank() != 1) throw ContractError("concat: expected vectors");
  std::vector<double> out(x.values());
  out.insert(out.end(), y.data().begin(), y.data().end());
  const std::size_t ia = a.id(), ib = b.id(), na = x.size(), total = out.size();
  return a.tape().record(Tensor::unchecked({total}, std::move(out)), {a, b},
                         [ia, ib, na](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
                           std::span<const double> g = buf[self];
                           auto ga = Tape::grad_for(tape, buf, ia);
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                           auto gb = Tape::grad_for(tape, buf, ib);
                           for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
                         });
}

Var column(Var matrix, std::size_t t) {
  const Tensor& m = matrix.value();
  if (m.rank() != 2 || t >= m.dim(1))
    throw ContractError("column: index " + std::to_string(t) + " out of range for " +
                        shape_string(m.shape()));
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = m[r * cols + t];
  const std::size_t im = matrix.id();
  return matrix.tape().record(
      Tensor::unchecked({rows}, std::move(out)), {matrix},
      [im, t, cols](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
        std::span<const double> g = buf[self];
        auto gm = Tape::grad_for(tape, buf, im);
        for (std::size_t r = 0; r < g.size(); ++r) gm[r * cols + t] += g[r];
      });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  const std::size_t width = rows[0].value().size();
  std::vector<double> out;
  out.reserve(rows.size() * width);
  std::vector<std::size_t> ids;
  for (const Var& r : rows) {
    if (r.value().rank() != 1 || r.value().size() != width)
      throw ContractError("stack_rows: rows must be equal-length vectors");
    out.insert(out.end(), r.value().data().begin(), r.value().data().end());
    ids.push_back(r.id());
  }
  return rows[0].tape().record(
      Tensor::unchecked({rows.size(), width}, std::move(out)), rows,
      [ids = std::move(ids), width](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
        std::span<const double> g = buf[self];
        for (std::size_t r = 0; r < ids.size(); ++r) {
          auto gr = Tape::grad_for(tape, buf, ids[r]);
          for (std::size_t j = 0; j < gr.size(); ++j) gr[j] += g[r * width + j];
        }
      });
}

Var row_norms(Var matrix, std::size_t begin, std::size_t end) {
  const Tensor& m = matrix.value();
  if (m.rank() != 2 || begin > end || end > m.dim(1))
    throw ContractError("row_norms: column range invalid for " + shape_string(m.shape()));
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t j = begin; j < end; ++j) ss += m[r * cols + j] * m[r * cols + j];
    out[r] = std::sqrt(ss);
  }
  const std::size_t im = matrix.id();
  return matrix.tape().record(
      Tensor::unchecked({rows}, std::move(out)), {matrix},
      [im, begin, end, cols](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
        std::span<const double> g = buf[self];
        const Tensor& norms = tape.value(self);
        const Tensor& x = tape.value(im);
        auto gm = Tape::grad_for(tape, buf, im);
        for (std::size_t r = 0; r < g.size(); ++r) {
          if (norms[r] == 0.0) continue;
          const double f = g[r] / norms[r];
          for (std::size_t j = begin; j < end; ++j) gm[r * cols + j] += f * x[r * cols + j];
        }
      });
}

Var frame_delta(Var matrix) {
  const Tensor& m = matrix.value();
  if (m.rank() != 2) throw ContractError("frame_delta: expected [T x D]");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t r = 1; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j)
      out[r * cols + j] = m[r * cols + j] - m[(r - 1) * cols + j];
  const std::size_t im = matrix.id();
  return matrix.tape().record(
      Tensor::unchecked(m.shape(), std::move(out)), {matrix},
      [im, rows, cols](const Tape& tape, std::size_t self, Tape::GradBuffers& buf) {
        std::span<const double> g = buf[self];
        auto gm = Tape::grad_for(tape, buf, im);
        for (std::size_t r = 1; r < rows; ++r)
          for (std::size_t j = 0; j < cols; ++j) {
            gm[r * cols + j] += g[r * cols + j];
            gm[(r - 1) * cols + j] -= g[r * cols + j];
          }
      });
}

}  // namespace listenhead
