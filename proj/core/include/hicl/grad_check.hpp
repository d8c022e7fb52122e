#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hicl/graph.hpp"
#include "hicl/tensor.hpp"

namespace hicl {

/// A scalar-valued tensor function built from graph primitives.
using TensorFn = std::function<Var(Graph&, const std::vector<Var>&)>;

struct ValueAndGrad {
  double value = 0.0;
  /// Aligned with the inputs; empty tensor where requires_grad was false
  /// or no gradient reached the input.
  std::vector<Tensor> grads;
};

/// Evaluate f and d(f)/d(input) for each input. f must produce a scalar.
ValueAndGrad value_and_grad(const TensorFn& f,
                            const std::vector<Tensor>& inputs,
                            const std::vector<bool>& requires_grad = {});

struct FdOptions {
  /// 0 checks every coordinate; otherwise a deterministic sample of this
  /// many coordinates per input (keeps checks through large parameter
  /// tensors inside a time budget).
  std::size_t max_coords_per_input = 0;
  std::uint64_t sample_seed = 0;
};

struct FdReport {
  double max_rel_err = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_coord = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t coords_checked = 0;
};

/// Central-difference oracle: (f(x+eps e) - f(x-eps e)) / 2 eps compared
/// coordinate-wise against value_and_grad. Relative error uses a unit
/// floor, |ad-fd| / max(1, |ad|, |fd|), so near-zero gradients are judged
/// on absolute error. Requires eps in (0, 1e-2] and a deterministic f
/// (two identical forward passes must agree bitwise).
FdReport finite_diff_check(const TensorFn& f,
                           const std::vector<Tensor>& inputs,
                           double epsilon, const FdOptions& opts = {});

}  // namespace hicl
