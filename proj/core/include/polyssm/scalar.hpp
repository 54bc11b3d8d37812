#pragma once

#include <cmath>
#include <concepts>
#include <span>

namespace polyssm {

// Scalar kernels shared by the plain (double), extended (long double, used
// for finite-difference references) and differentiable paths.

template <class F>
concept Real = std::floating_point<F>;

inline double value_of(double v) noexcept { return v; }
inline long double value_of(long double v) noexcept { return v; }

template <Real F>
F sigmoid(F z) noexcept {
  if (z >= 0) return F(1) / (F(1) + std::exp(-z));
  const F e = std::exp(z);
  return e / (F(1) + e);
}

template <Real F>
F softplus(F z) noexcept {
  if (z > F(30)) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

template <Real F>
F silu(F z) noexcept { return z * sigmoid(z); }

template <Real F>
F dot(std::span<const F> a, std::span<const F> b) noexcept {
  F s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double dot(std::span<const double> a, std::span<const double> b) noexcept { return dot<double>(a, b); }
inline long double dot(std::span<const long double> a, std::span<const long double> b) noexcept {
  return dot<long double>(a, b);
}

template <Real F>
F sum(std::span<const F> terms) noexcept {
  F s = 0;
  for (F t : terms) s += t;
  return s;
}
inline double sum(std::span<const double> terms) noexcept { return sum<double>(terms); }
inline long double sum(std::span<const long double> terms) noexcept { return sum<long double>(terms); }

}  // namespace polyssm
