// SPDX-License-Identifier: Apache-2.0
#include "listenhead/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "listenhead/error.hpp"

namespace listenhead {

namespace {

std::vector<Var> bind_all(Tape& tape, const std::vector<Tensor>& params) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.parameter(p));
  return vars;
}

double scalar_of(Var out) {
  if (out.value().size() != 1) throw ContractError("grad_check: function must return a scalar");
  return out.value()[0];
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

double evaluate(const TapedFunction& f, const std::vector<Tensor>& params) {
  Tape tape;
  const auto vars = bind_all(tape, params);
  return scalar_of(f(tape, vars));
}

GradCheckReport grad_check(const TapedFunction& f, const std::vector<Tensor>& params,
                           double epsilon, double tolerance) {
  Tape tape;
  const auto vars = bind_all(tape, params);
  const Var out = f(tape, vars);
  scalar_of(out);
  const Gradients grads = tape.backward(out);
  std::vector<Tensor> analytic;
  analytic.reserve(vars.size());
  for (const Var& v : vars) analytic.push_back(grads.of(v));
  return compare_gradients(f, params, analytic, epsilon, tolerance);
}

GradCheckReport compare_gradients(const TapedFunction& f, const std::vector<Tensor>& params,
                                  const std::vector<Tensor>& analytic, double epsilon,
                                  double tolerance) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2))
    throw ContractError("grad_check: epsilon must lie in (0, 1e-2]");
  if (analytic.size() != params.size())
    throw ContractError("grad_check: one analytic gradient per parameter required");

  const double base = evaluate(f, params);
  if (!bit_equal(base, evaluate(f, params)))
    throw NumericError("grad_check: function is not deterministic (two identical forward passes differ)");

  GradCheckReport report;
  std::vector<Tensor> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (analytic[p].shape() != params[p].shape())
      throw ContractError("grad_check: analytic gradient shape mismatch for parameter " +
                          std::to_string(p));
    std::vector<double> values = params[p].values();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      const auto at = [&](double offset) {
        values[i] = original + offset;
        probe[p] = Tensor(params[p].shape(), values);
        return evaluate(f, probe);
      };
      const double numeric = (at(epsilon) - at(-epsilon)) / (2.0 * epsilon);
      values[i] = original;

      const double a = analytic[p][i];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.entries_checked;
      if (std::isnan(rel) || rel > report.max_entry_error || report.entries_checked == 1) {
        report.max_entry_error = rel;
        report.worst_param = p;
        report.worst_entry = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
    probe[p] = params[p];
    const double tensor_error =
        std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-8});
    if (std::isnan(tensor_error) || tensor_error > report.max_relative_error || p == 0) {
      report.max_relative_error = tensor_error;
      report.worst_tensor = p;
    }
  }
  report.pass = report.max_relative_error < tolerance;
  return report;
}

}  // namespace listenhead
