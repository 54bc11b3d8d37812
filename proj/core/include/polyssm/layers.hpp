#pragma once

// Forward passes for the sequence layers. Inputs and outputs are D x L
// matrices (channels by positions). Every differentiable layer is a template
// over the scalar type so the same code runs on double and on ad::Var.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "polyssm/matrix.hpp"

namespace polyssm {

struct S6Variant {
  enum class Kind { Original, SimplifiedPoly, SimplifiedNonPoly, BbarEqualsB };

  Kind kind = Kind::Original;
  int p1_degree = 3;
  int p2_degree = 3;
  // Only meaningful for SimplifiedPoly: A_bar = S_delta x + A.
  bool linear_pA = false;

  static S6Variant original() { return {}; }
  static S6Variant simplified_poly(int p1 = 3, int p2 = 3, bool linear = false) {
    return {Kind::SimplifiedPoly, p1, p2, linear};
  }
  static S6Variant simplified_nonpoly() { return {Kind::SimplifiedNonPoly}; }
  static S6Variant bbar_equals_b() { return {Kind::BbarEqualsB}; }

  void validate() const;
  std::string tag() const;
  static Kind parse_kind(const std::string& tag);

  bool operator==(const S6Variant&) const = default;
};

// S_B, S_C: N x D. S_delta: 1 x D (one step size shared by all channels) or
// D x D (row d drives channel d). A: D x N.
template <class T>
struct BasicS6Weights {
  BasicMatrix<T> s_b;
  BasicMatrix<T> s_c;
  BasicMatrix<T> s_delta;
  BasicMatrix<T> a;

  std::size_t channels() const noexcept { return a.rows(); }
  std::size_t state_size() const noexcept { return a.cols(); }

  void validate() const {
    const std::size_t d = channels();
    const std::size_t n = state_size();
    auto expect = [](const BasicMatrix<T>& m, std::size_t r, std::size_t c, const char* name) {
      if (m.rows() != r || m.cols() != c) {
        throw DimensionError(std::string("S6 weights: ") + name + " is " + m.shape_string() +
                             ", expected " + std::to_string(r) + "x" + std::to_string(c));
      }
    };
    if (d == 0 || n == 0) throw DimensionError("S6 weights: A must be non-empty, got " + a.shape_string());
    expect(s_b, n, d, "S_B");
    expect(s_c, n, d, "S_C");
    if (s_delta.rows() != 1) expect(s_delta, d, d, "S_delta");
    expect(s_delta, s_delta.rows(), d, "S_delta");
  }

  // Whether every entry of A is strictly negative (keeps exp(delta A) < 1).
  bool a_strictly_negative() const {
    for (const auto& v : a.entries())
      if (!(value_of(v) < 0.0)) return false;
    return true;
  }
};
using S6Weights = BasicS6Weights<double>;

template <class T>
struct BasicAttentionWeights {
  BasicMatrix<T> w_q;
  BasicMatrix<T> w_k;
  BasicMatrix<T> w_v;
  double scale = 1.0;

  std::size_t channels() const noexcept { return w_q.rows(); }

  void validate() const {
    const std::size_t d = w_q.rows();
    for (const auto* m : {&w_q, &w_k, &w_v}) {
      if (m->rows() != d || m->cols() != d) {
        throw DimensionError("attention weights must be square and equal, got " + w_q.shape_string() +
                             ", " + w_k.shape_string() + ", " + w_v.shape_string());
      }
    }
  }
};
using AttentionWeights = BasicAttentionWeights<double>;

struct MambaFlags {
  bool use_silu = true;
  bool use_conv = true;
  bool use_residual = false;
  bool operator==(const MambaFlags&) const = default;
};

// Outer width D, inner width E. in_w, gate_w: E x D; out_w: D x E;
// biases are column vectors; conv: E x 2, column 0 multiplies the previous
// position and column 1 the current one.
template <class T>
struct BasicMambaBlockWeights {
  BasicMatrix<T> in_w, in_b;
  BasicMatrix<T> conv;
  BasicMatrix<T> gate_w, gate_b;
  BasicMatrix<T> out_w, out_b;
  BasicS6Weights<T> s6;
  S6Variant variant;
  MambaFlags flags;

  std::size_t outer() const noexcept { return in_w.cols(); }
  std::size_t inner() const noexcept { return in_w.rows(); }

  void validate() const {
    const std::size_t d = outer();
    const std::size_t e = inner();
    auto expect = [](const BasicMatrix<T>& m, std::size_t r, std::size_t c, const char* name) {
      if (m.rows() != r || m.cols() != c) {
        throw DimensionError(std::string("Mamba block: ") + name + " is " + m.shape_string() +
                             ", expected " + std::to_string(r) + "x" + std::to_string(c));
      }
    };
    expect(in_b, e, 1, "in_b");
    expect(conv, e, 2, "conv");
    expect(gate_w, e, d, "gate_w");
    expect(gate_b, e, 1, "gate_b");
    expect(out_w, d, e, "out_w");
    expect(out_b, d, 1, "out_b");
    s6.validate();
    if (s6.channels() != e) {
      throw DimensionError("Mamba block: S6 has " + std::to_string(s6.channels()) +
                           " channels, inner width is " + std::to_string(e));
    }
  }
};
using MambaBlockWeights = BasicMambaBlockWeights<double>;

// ---------------------------------------------------------------------------
// Scalar helpers

// Taylor polynomial of softplus at 0 truncated at `degree` (1..6).
template <class T>
T taylor_softplus(const T& z, int degree) {
  static constexpr double kCoeff[7] = {0.6931471805599453, 0.5, 0.125, 0.0, -1.0 / 192.0, 0.0, 1.0 / 2880.0};
  T acc(kCoeff[degree]);
  for (int k = degree - 1; k >= 0; --k) acc = acc * z + kCoeff[k];
  return acc;
}

// Taylor polynomial of exp at 0 truncated at `degree` (1..6).
template <class T>
T taylor_exp(const T& z, int degree) {
  static constexpr double kCoeff[7] = {1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0, 1.0 / 120.0, 1.0 / 720.0};
  T acc(kCoeff[degree]);
  for (int k = degree - 1; k >= 0; --k) acc = acc * z + kCoeff[k];
  return acc;
}

// ---------------------------------------------------------------------------
// LTI SSM on a scalar sequence: h_t = diag(a_bar) h_{t-1} + b_bar x_t, y_t = c^T h_t.
std::vector<double> lti_ssm_forward(const Matrix& a_bar, const Matrix& b_bar, const Matrix& c,
                                    const std::vector<double>& x);

namespace detail {

template <class T>
void check_state(const T& h, std::size_t channel, std::size_t pos) {
  if (!std::isfinite(value_of(h))) {
    throw NumericError("selective scan overflow at channel " + std::to_string(channel) + ", position " +
                       std::to_string(pos));
  }
}

template <class T>
std::vector<T> column(const BasicMatrix<T>& x, std::size_t t) {
  std::vector<T> col(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) col[r] = x(r, t);
  return col;
}

}  // namespace detail

// Selective scan. When `abar_trace` is non-null it receives the transition
// values as a (D*N) x L matrix, row d*N + n.
template <class T>
BasicMatrix<T> selective_forward(const BasicS6Weights<T>& w, const S6Variant& v, const BasicMatrix<T>& x,
                                 Matrix* abar_trace = nullptr) {
  using std::exp;
  w.validate();
  v.validate();
  const std::size_t D = w.channels();
  const std::size_t N = w.state_size();
  const std::size_t R = w.s_delta.rows();
  const std::size_t L = x.cols();
  if (x.rows() != D) {
    throw DimensionError("selective_forward: input " + x.shape_string() + " for " + std::to_string(D) +
                         " channels");
  }
  using Kind = S6Variant::Kind;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));
  BasicMatrix<T> y(D, L);
  if (abar_trace) *abar_trace = Matrix(D * N, L);
  std::vector<T> h(D * N, T(0.0));
  std::vector<T> b(N), c(N), z(R);
  for (std::size_t t = 0; t < L; ++t) {
    const std::vector<T> col = detail::column(x, t);
    const std::span<const T> cs(col);
    for (std::size_t n = 0; n < N; ++n) {
      b[n] = dot(w.s_b.row(n), cs);
      c[n] = dot(w.s_c.row(n), cs);
    }
    for (std::size_t r = 0; r < R; ++r) z[r] = dot(w.s_delta.row(r), cs);
    for (std::size_t d = 0; d < D; ++d) {
      const T& zd = z[R == 1 ? 0 : d];
      const T& xd = col[d];
      T delta(1.0);
      if (v.kind != Kind::SimplifiedPoly) delta = softplus(zd);
      T p1(0.0);
      if (v.kind == Kind::SimplifiedPoly && !v.linear_pA) p1 = taylor_softplus(zd * inv_sqrt_d, v.p1_degree);
      T acc(0.0);
      for (std::size_t n = 0; n < N; ++n) {
        T abar;
        if (v.kind != Kind::SimplifiedPoly) {
          abar = exp(delta * w.a(d, n));
        } else if (v.linear_pA) {
          abar = zd + w.a(d, n);
        } else {
          abar = taylor_exp(p1 * w.a(d, n), v.p2_degree);
        }
        const T bbar = v.kind == Kind::Original ? delta * b[n] : b[n];
        T& hs = h[d * N + n];
        hs = abar * hs + bbar * xd;
        detail::check_state(hs, d, t);
        acc += c[n] * hs;
        if (abar_trace) (*abar_trace)(d * N + n, t) = value_of(abar);
      }
      y(d, t) = acc;
    }
  }
  return y;
}

template <class T>
BasicMatrix<T> causal_linear_attention_forward(const BasicAttentionWeights<T>& w, const BasicMatrix<T>& x) {
  w.validate();
  if (x.rows() != w.channels()) {
    throw DimensionError("linear attention: input " + x.shape_string() + " for weights " + w.w_q.shape_string());
  }
  const std::size_t D = x.rows();
  const std::size_t L = x.cols();
  const BasicMatrix<T> q = matmul(w.w_q, x);
  const BasicMatrix<T> k = transpose(matmul(w.w_k, x));
  const BasicMatrix<T> val = matmul(w.w_v, x);
  BasicMatrix<T> y(D, L);
  std::vector<T> score(L);
  std::vector<T> vals(L);
  for (std::size_t t = 0; t < L; ++t) {
    const std::vector<T> qt = detail::column(q, t);
    for (std::size_t j = 0; j <= t; ++j) score[j] = dot(std::span<const T>(qt), k.row(j)) * w.scale;
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t j = 0; j <= t; ++j) vals[j] = val(d, j);
      y(d, t) = dot(std::span<const T>(score.data(), t + 1), std::span<const T>(vals.data(), t + 1));
    }
  }
  require_finite(y, "linear attention");
  return y;
}

// `pe` is L' x D (L' >= L) and is added to the input before the projections;
// pass nullptr for no positional encoding.
template <class T>
BasicMatrix<T> softmax_attention_forward(const BasicAttentionWeights<T>& w, const BasicMatrix<T>& x,
                                         const BasicMatrix<T>* pe = nullptr) {
  using std::exp;
  w.validate();
  if (x.rows() != w.channels()) {
    throw DimensionError("softmax attention: input " + x.shape_string() + " for weights " + w.w_q.shape_string());
  }
  const std::size_t D = x.rows();
  const std::size_t L = x.cols();
  BasicMatrix<T> u = x;
  if (pe) {
    if (pe->cols() != D || pe->rows() < L) {
      throw DimensionError("softmax attention: PE " + pe->shape_string() + " for input " + x.shape_string());
    }
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t t = 0; t < L; ++t) u(d, t) = u(d, t) + (*pe)(t, d);
  }
  const BasicMatrix<T> q = matmul(w.w_q, u);
  const BasicMatrix<T> k = transpose(matmul(w.w_k, u));
  const BasicMatrix<T> val = matmul(w.w_v, u);
  BasicMatrix<T> y(D, L);
  std::vector<T> weight(L);
  std::vector<T> vals(L);
  for (std::size_t t = 0; t < L; ++t) {
    const std::vector<T> qt = detail::column(q, t);
    decltype(value_of(T())) shift = -INFINITY;
    for (std::size_t j = 0; j <= t; ++j) {
      weight[j] = dot(std::span<const T>(qt), k.row(j)) * w.scale;
      shift = std::max(shift, value_of(weight[j]));
    }
    for (std::size_t j = 0; j <= t; ++j) weight[j] = exp(weight[j] - shift);
    const T total = sum(std::span<const T>(weight.data(), t + 1));
    const T inv = 1.0 / total;
    for (std::size_t j = 0; j <= t; ++j) weight[j] = weight[j] * inv;
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t j = 0; j <= t; ++j) vals[j] = val(d, j);
      y(d, t) = dot(std::span<const T>(weight.data(), t + 1), std::span<const T>(vals.data(), t + 1));
    }
  }
  require_finite(y, "softmax attention");
  return y;
}

template <class T>
BasicMatrix<T> mamba_block_forward(const BasicMambaBlockWeights<T>& w, const BasicMatrix<T>& u) {
  w.validate();
  if (u.rows() != w.outer()) {
    throw DimensionError("Mamba block: input " + u.shape_string() + " for outer width " + std::to_string(w.outer()));
  }
  const std::size_t E = w.inner();
  const std::size_t L = u.cols();
  BasicMatrix<T> xin = matmul(w.in_w, u);
  BasicMatrix<T> gate = matmul(w.gate_w, u);
  for (std::size_t e = 0; e < E; ++e) {
    for (std::size_t t = 0; t < L; ++t) {
      xin(e, t) = xin(e, t) + w.in_b(e, 0);
      gate(e, t) = gate(e, t) + w.gate_b(e, 0);
    }
  }
  BasicMatrix<T> xs = xin;
  if (w.flags.use_conv) {
    for (std::size_t e = 0; e < E; ++e) {
      for (std::size_t t = 0; t < L; ++t) {
        T v = w.conv(e, 1) * xin(e, t);
        if (t > 0) v = v + w.conv(e, 0) * xin(e, t - 1);
        xs(e, t) = v;
      }
    }
  }
  if (w.flags.use_silu) {
    xs = map_unary(Elementwise::Silu, xs);
    gate = map_unary(Elementwise::Silu, gate);
  }
  const BasicMatrix<T> ys = selective_forward(w.s6, w.variant, xs);
  BasicMatrix<T> out = matmul(w.out_w, hadamard(ys, gate));
  for (std::size_t d = 0; d < out.rows(); ++d) {
    for (std::size_t t = 0; t < L; ++t) {
      out(d, t) = out(d, t) + w.out_b(d, 0);
      if (w.flags.use_residual) out(d, t) = out(d, t) + u(d, t);
    }
  }
  require_finite(out, "Mamba block");
  return out;
}

// Identity-initialized weights: in/gate/out maps are identities (D = E),
// gate bias 0, conv kernel [0, 1].
MambaBlockWeights identity_mamba_block(std::size_t D, std::size_t N, const S6Variant& variant);

// Single-channel S6 (simplified polynomial, linear p_A, S_delta = 0, A = 1)
// whose output equals a scalar causal linear-attention head:
// S_B = w_k w_v, S_C = scale w_q.
S6Weights attention_as_s6(const AttentionWeights& w);
inline S6Variant attention_equivalent_variant() { return S6Variant::simplified_poly(3, 3, true); }

std::size_t count_parameters(const S6Weights& w);
std::size_t count_parameters(const AttentionWeights& w);
std::size_t count_parameters(const MambaBlockWeights& w);

}  // namespace polyssm
