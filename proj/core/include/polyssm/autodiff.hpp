#pragma once

// Scalar reverse-mode differentiation on a thread-local tape.
//
// Every arithmetic operation on `Var` appends one node to the active tape and
// records the local partial derivative to each non-constant parent. Operations
// whose operands are all constants are folded and record nothing, so weights
// that are not lifted as leaves cost no tape space.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "polyssm/scalar.hpp"

namespace polyssm::ad {

inline constexpr std::uint32_t kConstant = std::numeric_limits<std::uint32_t>::max();

class Tape {
 public:
  Tape();

  void clear();
  void set_recording(bool on) noexcept { recording_ = on; }
  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return offset_.size() - 1; }

  std::uint32_t leaf();
  std::uint32_t node(std::uint32_t p0, double d0);
  std::uint32_t node(std::uint32_t p0, double d0, std::uint32_t p1, double d1);
  std::uint32_t node(std::span<const std::uint32_t> parents, std::span<const double> partials);

  // Reverse sweep seeded with d(root)/d(root) = 1. `adjoint` is resized to the
  // tape length; entry i holds d(root)/d(node i).
  void backward(std::uint32_t root, std::vector<double>& adjoint) const;

 private:
  std::vector<std::uint32_t> offset_;
  std::vector<std::uint32_t> parent_;
  std::vector<double> partial_;
  bool recording_ = true;
};

// The tape used by all Var arithmetic on the calling thread.
Tape& tape();

// Clears the thread's tape on entry and exit.
class TapeScope {
 public:
  TapeScope() { tape().clear(); }
  ~TapeScope() { tape().clear(); }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
};

class Var {
 public:
  Var() = default;
  Var(double v) : value_(v) {}  // NOLINT: constants convert implicitly
  Var(double v, std::uint32_t id) : value_(v), id_(id) {}

  static Var leaf(double v) { return Var(v, tape().leaf()); }

  double value() const noexcept { return value_; }
  std::uint32_t id() const noexcept { return id_; }
  bool is_constant() const noexcept { return id_ == kConstant; }

  Var& operator+=(const Var& o);
  Var& operator-=(const Var& o);
  Var& operator*=(const Var& o);
  Var& operator/=(const Var& o);

 private:
  double value_ = 0.0;
  std::uint32_t id_ = kConstant;
};

inline double value_of(const Var& v) noexcept { return v.value(); }

inline Var unary(double value, const Var& a, double da) {
  return Var(value, tape().node(a.id(), da));
}
inline Var binary(double value, const Var& a, double da, const Var& b, double db) {
  return Var(value, tape().node(a.id(), da, b.id(), db));
}

inline Var operator+(const Var& a, const Var& b) { return binary(a.value() + b.value(), a, 1.0, b, 1.0); }
inline Var operator-(const Var& a, const Var& b) { return binary(a.value() - b.value(), a, 1.0, b, -1.0); }
inline Var operator*(const Var& a, const Var& b) {
  return binary(a.value() * b.value(), a, b.value(), b, a.value());
}
inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.value();
  return binary(a.value() * inv, a, inv, b, -a.value() * inv * inv);
}
inline Var operator-(const Var& a) { return unary(-a.value(), a, -1.0); }

inline Var operator+(const Var& a, double b) { return unary(a.value() + b, a, 1.0); }
inline Var operator+(double a, const Var& b) { return unary(a + b.value(), b, 1.0); }
inline Var operator-(const Var& a, double b) { return unary(a.value() - b, a, 1.0); }
inline Var operator-(double a, const Var& b) { return unary(a - b.value(), b, -1.0); }
inline Var operator*(const Var& a, double b) { return unary(a.value() * b, a, b); }
inline Var operator*(double a, const Var& b) { return unary(a * b.value(), b, a); }
inline Var operator/(const Var& a, double b) { return unary(a.value() / b, a, 1.0 / b); }
inline Var operator/(double a, const Var& b) {
  const double inv = 1.0 / b.value();
  return unary(a * inv, b, -a * inv * inv);
}

inline Var& Var::operator+=(const Var& o) { return *this = *this + o; }
inline Var& Var::operator-=(const Var& o) { return *this = *this - o; }
inline Var& Var::operator*=(const Var& o) { return *this = *this * o; }
inline Var& Var::operator/=(const Var& o) { return *this = *this / o; }

inline Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return unary(e, a, e);
}
inline Var log(const Var& a) { return unary(std::log(a.value()), a, 1.0 / a.value()); }
inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.value());
  return unary(s, a, 0.5 / s);
}
inline Var softplus(const Var& a) {
  return unary(polyssm::softplus(a.value()), a, polyssm::sigmoid(a.value()));
}
inline Var sigmoid(const Var& a) {
  const double s = polyssm::sigmoid(a.value());
  return unary(s, a, s * (1.0 - s));
}
inline Var silu(const Var& a) {
  const double s = polyssm::sigmoid(a.value());
  return unary(a.value() * s, a, s * (1.0 + a.value() * (1.0 - s)));
}

// Sum of a[i] * b[i] recorded as a single node.
Var dot(std::span<const Var> a, std::span<const Var> b);
// Sum of terms recorded as a single node.
Var sum(std::span<const Var> terms);

// d(root)/d(v) for each v, after one reverse sweep over the active tape.
std::vector<double> gradient(const Var& root, std::span<const Var> wrt);

}  // namespace polyssm::ad
