#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "polyssm/autodiff.hpp"
#include "polyssm/matrix.hpp"

namespace polyssm {

using VarMatrix = BasicMatrix<ad::Var>;

struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;

  ParamTensor() = default;
  ParamTensor(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols(), 0.0) {}
};

// Constant (non-differentiated) copy of a plain matrix.
VarMatrix as_constant(const Matrix& m);
// Registers every entry as a tape leaf.
VarMatrix as_leaves(const Matrix& m);
std::vector<VarMatrix> as_leaves(std::span<const ParamTensor> params);

// Adds d(loss)/d(leaf) into each tensor's grad.
void accumulate_grads(const ad::Var& loss, std::span<const VarMatrix> leaves,
                      std::span<ParamTensor> params);

using LossFn = std::function<ad::Var(std::span<const VarMatrix>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients against central differences for every
// scalar parameter. Relative error is |analytic - numeric| / (|analytic| + 1e-12).
GradCheckResult grad_check(const LossFn& loss, std::span<const ParamTensor> params,
                           double epsilon = 1e-5);

// Same check with the central differences taken on `reference`, the same loss
// evaluated in long double. Resolves gradients far below double rounding of
// the loss value (deep attention stacks at initialization reach ~1e-10).
using ExtendedLossFn = std::function<long double(std::span<const BasicMatrix<long double>>)>;
GradCheckResult grad_check(const LossFn& loss, const ExtendedLossFn& reference,
                           std::span<const ParamTensor> params, double epsilon = 1e-5);

}  // namespace polyssm
