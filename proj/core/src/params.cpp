#include "polyssm/params.hpp"

#include <cmath>

namespace polyssm {

VarMatrix as_constant(const Matrix& m) {
  VarMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.entries()[i] = ad::Var(m.entries()[i]);
  return out;
}

VarMatrix as_leaves(const Matrix& m) {
  VarMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.entries()[i] = ad::Var::leaf(m.entries()[i]);
  return out;
}

std::vector<VarMatrix> as_leaves(std::span<const ParamTensor> params) {
  std::vector<VarMatrix> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(as_leaves(p.value));
  return out;
}

void accumulate_grads(const ad::Var& loss, std::span<const VarMatrix> leaves,
                      std::span<ParamTensor> params) {
  if (leaves.size() != params.size()) {
    throw DimensionError("accumulate_grads: " + std::to_string(leaves.size()) + " leaf sets for " +
                         std::to_string(params.size()) + " parameters");
  }
  thread_local std::vector<double> adjoint;
  ad::tape().backward(loss.id(), adjoint);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto src = leaves[p].entries();
    auto dst = params[p].grad.entries();
    for (std::size_t i = 0; i < src.size(); ++i) {
      const auto id = src[i].id();
      if (id != ad::kConstant && id < adjoint.size()) dst[i] += adjoint[id];
    }
  }
}

namespace {

double eval_constant(const LossFn& loss, const std::vector<VarMatrix>& args) {
  const double v = loss(args).value();
  if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
  return v;
}

}  // namespace

namespace {

using Numeric = std::function<double(std::size_t, std::size_t, double)>;

GradCheckResult compare(const LossFn& loss, std::span<const ParamTensor> params, double epsilon,
                        const Numeric& numeric_grad) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw InputError("grad_check: epsilon " + std::to_string(epsilon) + " outside [1e-7, 1e-3]");
  }
  std::vector<std::vector<double>> analytic(params.size());
  {
    ad::TapeScope scope;
    auto leaves = as_leaves(params);
    const ad::Var l = loss(leaves);
    if (!std::isfinite(l.value())) throw NumericError("grad_check: loss is not finite");
    std::vector<double> adjoint;
    ad::tape().backward(l.id(), adjoint);
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (const auto& v : leaves[p].entries()) {
        analytic[p].push_back(v.id() < adjoint.size() ? adjoint[v.id()] : 0.0);
      }
    }
  }

  GradCheckResult result;
  bool first = true;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].value.size(); ++i) {
      const double numeric = numeric_grad(p, i, epsilon);
      const double a = analytic[p][i];
      const double rel = std::abs(a - numeric) / (std::abs(a) + 1e-12);
      if (first || rel > result.max_rel_error) {
        first = false;
        result.max_rel_error = rel;
        result.worst_param = params[p].name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace

GradCheckResult grad_check(const LossFn& loss, std::span<const ParamTensor> params, double epsilon) {
  std::vector<VarMatrix> args;
  for (const auto& p : params) args.push_back(as_constant(p.value));
  return compare(loss, params, epsilon, [&](std::size_t p, std::size_t i, double eps) {
    const double x = params[p].value.entries()[i];
    args[p].entries()[i] = ad::Var(x + eps);
    const double up = eval_constant(loss, args);
    args[p].entries()[i] = ad::Var(x - eps);
    const double down = eval_constant(loss, args);
    args[p].entries()[i] = ad::Var(x);
    return (up - down) / (2.0 * eps);
  });
}

GradCheckResult grad_check(const LossFn& loss, const ExtendedLossFn& reference, std::span<const ParamTensor> params,
                           double epsilon) {
  std::vector<BasicMatrix<long double>> args;
  for (const auto& p : params) {
    BasicMatrix<long double> m(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < m.size(); ++i) m.entries()[i] = p.value.entries()[i];
    args.push_back(std::move(m));
  }
  auto eval = [&] {
    const long double v = reference(args);
    if (!std::isfinite(v)) throw NumericError("grad_check: reference loss is not finite");
    return v;
  };
  return compare(loss, params, epsilon, [&](std::size_t p, std::size_t i, double eps) {
    const long double x = args[p].entries()[i];
    const long double h = eps;
    args[p].entries()[i] = x + h;
    const long double up = eval();
    args[p].entries()[i] = x - h;
    const long double down = eval();
    args[p].entries()[i] = x;
    return static_cast<double>((up - down) / (2 * h));
  });
}

}  // namespace polyssm
