#include "polyssm/layers.hpp"

namespace polyssm {

void S6Variant::validate() const {
  if (kind != Kind::SimplifiedPoly) return;
  if (p1_degree < 1 || p1_degree > 6 || p2_degree < 1 || p2_degree > 6) {
    throw InputError("S6 variant: Taylor degrees must lie in [1, 6], got p1=" + std::to_string(p1_degree) +
                     " p2=" + std::to_string(p2_degree));
  }
}

std::string S6Variant::tag() const {
  switch (kind) {
    case Kind::Original: return "original";
    case Kind::SimplifiedPoly: return "simplified_poly";
    case Kind::SimplifiedNonPoly: return "simplified_nonpoly";
    case Kind::BbarEqualsB: return "bbar_equals_b";
  }
  return "original";
}

S6Variant::Kind S6Variant::parse_kind(const std::string& tag) {
  if (tag == "original") return Kind::Original;
  if (tag == "simplified_poly") return Kind::SimplifiedPoly;
  if (tag == "simplified_nonpoly") return Kind::SimplifiedNonPoly;
  if (tag == "bbar_equals_b") return Kind::BbarEqualsB;
  throw InputError("unknown S6 variant '" + tag + "'");
}

std::vector<double> lti_ssm_forward(const Matrix& a_bar, const Matrix& b_bar, const Matrix& c,
                                    const std::vector<double>& x) {
  const std::size_t n = a_bar.size();
  if (a_bar.cols() != 1 || b_bar.rows() != n || b_bar.cols() != 1 || c.rows() != n || c.cols() != 1) {
    throw DimensionError("LTI SSM: a_bar " + a_bar.shape_string() + ", b_bar " + b_bar.shape_string() + ", c " +
                         c.shape_string() + " (expected three Nx1)");
  }
  std::vector<double> h(n, 0.0);
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      h[k] = a_bar(k, 0) * h[k] + b_bar(k, 0) * x[t];
      detail::check_state(h[k], k, t);
      acc += c(k, 0) * h[k];
    }
    y[t] = acc;
  }
  return y;
}

MambaBlockWeights identity_mamba_block(std::size_t D, std::size_t N, const S6Variant& variant) {
  MambaBlockWeights w;
  w.in_w = Matrix::identity(D);
  w.in_b = Matrix(D, 1);
  w.conv = Matrix(D, 2);
  for (std::size_t d = 0; d < D; ++d) w.conv(d, 1) = 1.0;
  w.gate_w = Matrix::identity(D);
  w.gate_b = Matrix(D, 1);
  w.out_w = Matrix::identity(D);
  w.out_b = Matrix(D, 1);
  w.s6 = {Matrix(N, D), Matrix(N, D), Matrix(1, D), Matrix(D, N)};
  w.variant = variant;
  return w;
}

S6Weights attention_as_s6(const AttentionWeights& w) {
  w.validate();
  if (w.channels() != 1) {
    throw UnsupportedError("attention_as_s6 needs a scalar head, got width " + std::to_string(w.channels()));
  }
  return {Matrix(1, 1, w.w_k(0, 0) * w.w_v(0, 0)), Matrix(1, 1, w.scale * w.w_q(0, 0)), Matrix(1, 1, 0.0),
          Matrix(1, 1, 1.0)};
}

std::size_t count_parameters(const S6Weights& w) {
  return w.s_b.size() + w.s_c.size() + w.s_delta.size() + w.a.size();
}

std::size_t count_parameters(const AttentionWeights& w) { return w.w_q.size() + w.w_k.size() + w.w_v.size(); }

std::size_t count_parameters(const MambaBlockWeights& w) {
  std::size_t n = w.in_w.size() + w.in_b.size() + w.gate_w.size() + w.gate_b.size() + w.out_w.size() +
                  w.out_b.size() + count_parameters(w.s6);
  if (w.flags.use_conv) n += w.conv.size();
  return n;
}

}  // namespace polyssm
