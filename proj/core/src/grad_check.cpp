#include "hicl/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hicl/errors.hpp"
#include "hicl/rng.hpp"

namespace hicl {
namespace {

double evaluate_scalar(const TensorFn& f, const std::vector<Tensor>& inputs) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(g.leaf(t.clone(), false));
  Var out = f(g, vars);
  const Tensor& v = g.value(out);
  if (v.size() != 1) {
    throw NumericsError("expected scalar output, got " + v.shape_str());
  }
  return v.at(0);
}

}  // namespace

ValueAndGrad value_and_grad(const TensorFn& f,
                            const std::vector<Tensor>& inputs,
                            const std::vector<bool>& requires_grad) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const bool rg = requires_grad.empty() ? true : requires_grad[i];
    vars.push_back(g.leaf(inputs[i].clone(), rg));
  }
  Var out = f(g, vars);
  const Tensor& v = g.value(out);
  if (v.size() != 1) {
    throw NumericsError("value_and_grad: f must be scalar-valued, got " +
                        v.shape_str());
  }
  g.backward(out);

  ValueAndGrad result;
  result.value = v.at(0);
  result.grads.resize(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (const Tensor* gr = g.grad(vars[i])) {
      result.grads[i] = gr->clone();
    } else if (!requires_grad.empty() && !requires_grad[i]) {
      // left empty on purpose
    } else if (g.requires_grad(vars[i])) {
      // tracked but unreached: gradient is identically zero
      result.grads[i] = Tensor::zeros(inputs[i].shape());
    }
  }
  return result;
}

FdReport finite_diff_check(const TensorFn& f,
                           const std::vector<Tensor>& inputs, double epsilon,
                           const FdOptions& opts) {
  if (!(epsilon > 0.0) || epsilon > 1e-2) {
    throw NumericsError("finite_diff_check: epsilon must be in (0, 1e-2]");
  }

  const double base = evaluate_scalar(f, inputs);
  const double replay = evaluate_scalar(f, inputs);
  if (std::memcmp(&base, &replay, sizeof(double)) != 0) {
    throw NumericsError(
        "finite_diff_check: f is not deterministic (two identical forward "
        "passes disagree)");
  }

  ValueAndGrad vg = value_and_grad(f, inputs);

  FdReport report;
  RngStream sampler(opts.sample_seed, RngPurpose::kData);
  std::uint64_t draw = 0;

  std::vector<Tensor> work;
  work.reserve(inputs.size());
  for (const Tensor& t : inputs) work.push_back(t.clone());

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::size_t n = inputs[i].size();
    std::vector<std::size_t> coords;
    if (opts.max_coords_per_input == 0 || n <= opts.max_coords_per_input) {
      coords.resize(n);
      for (std::size_t k = 0; k < n; ++k) coords[k] = k;
    } else {
      for (std::size_t k = 0; k < opts.max_coords_per_input; ++k)
        coords.push_back(sampler.below_at(draw++, n));
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    }

    for (std::size_t c : coords) {
      const double saved = work[i].at(c);
      work[i].data()[c] = saved + epsilon;
      const double up = evaluate_scalar(f, work);
      work[i].data()[c] = saved - epsilon;
      const double down = evaluate_scalar(f, work);
      work[i].data()[c] = saved;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = vg.grads[i].empty() ? 0.0 : vg.grads[i].at(c);
      const double denom =
          std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
      const double rel = std::fabs(analytic - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_input = i;
        report.worst_coord = c;
        report.analytic_at_worst = analytic;
        report.numeric_at_worst = numeric;
      }
    }
  }
  return report;
}

}  // namespace hicl
