#include <gtest/gtest.h>

#include <cmath>

#include "polyssm/layers.hpp"
#include "polyssm/rng.hpp"
#include "polyssm/weights_io.hpp"

using namespace polyssm;

namespace {

Matrix row(std::initializer_list<double> v) { return Matrix(1, v.size(), std::vector<double>(v)); }

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.entries()) v = rng.uniform(lo, hi);
  return m;
}

S6Weights scalar_s6(double sb, double sc, double sd, double a) {
  return {Matrix(1, 1, sb), Matrix(1, 1, sc), Matrix(1, 1, sd), Matrix(1, 1, a)};
}

// Outer width 1, inner width 2 (a constant-one channel and a copy of x), so
// that B_bar = C = 1 and A_bar = 0: the S6 branch passes x through.
MambaBlockWeights pass_through_block(double gate_bias) {
  MambaBlockWeights w;
  w.in_w = Matrix::from_rows({{0.0}, {1.0}});
  w.in_b = Matrix::from_rows({{1.0}, {0.0}});
  w.conv = Matrix(2, 2);
  w.gate_w = Matrix(2, 1);
  w.gate_b = Matrix(2, 1, gate_bias);
  w.out_w = Matrix::from_rows({{0.0, 1.0}});
  w.out_b = Matrix(1, 1, 0.25);
  w.s6 = {Matrix::from_rows({{1.0, 0.0}}), Matrix::from_rows({{1.0, 0.0}}), Matrix(2, 2), Matrix(2, 1)};
  w.variant = S6Variant::simplified_poly(3, 3, true);
  w.flags = {false, false, false};
  return w;
}

}  // namespace

TEST(LtiSsm, IdentityRunningSumAndDecay) {
  const Matrix one(1, 1, 1.0);
  EXPECT_EQ(lti_ssm_forward(Matrix(1, 1, 0.0), one, one, {1, 2, 3}), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(lti_ssm_forward(one, one, one, {1, 2, 3}), (std::vector<double>{1, 3, 6}));
  EXPECT_EQ(lti_ssm_forward(Matrix(1, 1, 0.5), one, one, {1, 1}), (std::vector<double>{1, 1.5}));
}

TEST(Selective, NonPolyHandRecurrence) {
  // Delta = softplus(0) = ln 2, A_bar = 1, h accumulates x^2.
  const Matrix y = selective_forward(scalar_s6(1, 1, 0, 0), S6Variant::simplified_nonpoly(), row({1, 2}));
  EXPECT_NEAR(y(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(y(0, 1), 10.0, 1e-14);
}

TEST(Selective, LinearPolyHandRecurrence) {
  const Matrix y = selective_forward(scalar_s6(1, 1, 1, 0), S6Variant::simplified_poly(3, 3, true), row({1, 1}));
  EXPECT_DOUBLE_EQ(y(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(y(0, 1), 2.0);
}

TEST(Selective, OriginalMatchesHandFormula) {
  const double sb = 0.7, sc = -0.4, sd = 0.3, a = -1.2;
  const std::vector<double> x = {0.5, -1.0, 2.0};
  const Matrix y = selective_forward(scalar_s6(sb, sc, sd, a), S6Variant::original(), row({0.5, -1.0, 2.0}));
  double h = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double delta = std::log1p(std::exp(sd * x[t]));
    h = std::exp(delta * a) * h + delta * sb * x[t] * x[t];
    EXPECT_NEAR(y(0, t), sc * x[t] * h, 1e-14);
  }
}

TEST(Selective, ZeroInputInjectionGivesZeros) {
  Rng rng(3);
  const Matrix x = random_matrix(rng, 3, 5);
  for (const auto& v : {S6Variant::original(), S6Variant::simplified_poly(), S6Variant::simplified_poly(3, 3, true),
                        S6Variant::simplified_nonpoly(), S6Variant::bbar_equals_b()}) {
    S6Weights w{Matrix(2, 3), random_matrix(rng, 2, 3), random_matrix(rng, 1, 3), Matrix(3, 2, -1.0)};
    const Matrix y = selective_forward(w, v, x);
    for (double e : y.entries()) EXPECT_EQ(e, 0.0);
  }
}

TEST(Selective, ShapeErrors) {
  S6Weights w = scalar_s6(1, 1, 1, 0);
  EXPECT_THROW(selective_forward(w, S6Variant::original(), Matrix(2, 3)), DimensionError);
  w.s_delta = Matrix(2, 1);
  EXPECT_THROW(selective_forward(w, S6Variant::original(), Matrix(1, 3)), DimensionError);
}

TEST(Selective, OverflowNamesChannelAndPosition) {
  try {
    selective_forward(scalar_s6(1, 1, 0, 1e3), S6Variant::simplified_poly(3, 3, true), Matrix(1, 200, 1e3));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("channel 0"), std::string::npos);
  }
}

TEST(Selective, CausalPerturbation) {
  Rng rng(17);
  const S6Weights w{random_matrix(rng, 2, 3), random_matrix(rng, 2, 3), random_matrix(rng, 1, 3),
                    random_matrix(rng, 3, 2, -1.5, -0.5)};
  const Matrix x = random_matrix(rng, 3, 7);
  for (const auto& v : {S6Variant::original(), S6Variant::simplified_poly(), S6Variant::simplified_nonpoly()}) {
    const Matrix base = selective_forward(w, v, x);
    for (std::size_t t = 0; t < 7; ++t) {
      Matrix xp = x;
      xp(1, t) += 0.37;
      const Matrix y = selective_forward(w, v, xp);
      for (std::size_t s = 0; s < t; ++s) {
        for (std::size_t d = 0; d < 3; ++d) EXPECT_EQ(y(d, s), base(d, s));
      }
    }
  }
}

TEST(Selective, StateChannelsAreIndependent) {
  Rng rng(23);
  const Matrix x = random_matrix(rng, 3, 6);
  const S6Weights two{random_matrix(rng, 2, 3), random_matrix(rng, 2, 3), random_matrix(rng, 1, 3),
                      random_matrix(rng, 3, 2, -1.5, -0.5)};
  auto part = [&](std::size_t n) {
    S6Weights w{Matrix(1, 3), Matrix(1, 3), two.s_delta, Matrix(3, 1)};
    for (std::size_t d = 0; d < 3; ++d) {
      w.s_b(0, d) = two.s_b(n, d);
      w.s_c(0, d) = two.s_c(n, d);
      w.a(d, 0) = two.a(d, n);
    }
    return w;
  };
  for (const auto& v : {S6Variant::original(), S6Variant::simplified_poly(), S6Variant::simplified_nonpoly()}) {
    const Matrix y = selective_forward(two, v, x);
    const Matrix y0 = selective_forward(part(0), v, x);
    const Matrix y1 = selective_forward(part(1), v, x);
    for (std::size_t i = 0; i < y.size(); ++i) {
      EXPECT_NEAR(y.entries()[i], y0.entries()[i] + y1.entries()[i], 1e-13);
    }
  }
}

TEST(Selective, TaylorDegreesConvergeToNonPoly) {
  Rng rng(29);
  const S6Weights w{random_matrix(rng, 1, 2), random_matrix(rng, 1, 2), random_matrix(rng, 1, 2),
                    random_matrix(rng, 2, 1, -1.0, -0.2)};
  const Matrix x = random_matrix(rng, 2, 6, -0.5, 0.5);
  const Matrix ref = selective_forward(w, S6Variant::simplified_nonpoly(), x);
  // The polynomial variant scales S_delta x by 1/sqrt(D); compare at the same Delta.
  S6Weights scaled = w;
  for (double& v : scaled.s_delta.entries()) v *= std::sqrt(2.0);
  double previous = INFINITY;
  for (int degree : {2, 4, 6}) {
    const Matrix y = selective_forward(scaled, S6Variant::simplified_poly(degree, degree), x);
    double gap = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) gap = std::max(gap, std::abs(y.entries()[i] - ref.entries()[i]));
    EXPECT_LT(gap, previous);
    previous = gap;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(Taylor, KnownCoefficients) {
  EXPECT_NEAR(taylor_softplus(0.2, 6), std::log1p(std::exp(0.2)), 1e-9);
  EXPECT_NEAR(taylor_exp(0.3, 6), std::exp(0.3), 1e-6);
  EXPECT_DOUBLE_EQ(taylor_softplus(0.0, 3), std::log(2.0));
}

TEST(LinearAttention, ScalarExample) {
  AttentionWeights w{Matrix(1, 1, 1.0), Matrix(1, 1, 1.0), Matrix(1, 1, 1.0), 1.0};
  const Matrix y = causal_linear_attention_forward(w, row({1, 2}));
  EXPECT_DOUBLE_EQ(y(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(y(0, 1), 10.0);
}

TEST(LinearAttention, ZeroValuesAndSingleToken) {
  AttentionWeights w{Matrix(1, 1, 2.0), Matrix(1, 1, 3.0), Matrix(1, 1, 0.0), 1.0};
  const Matrix zero = causal_linear_attention_forward(w, row({1, 2, 3}));
  for (double e : zero.entries()) EXPECT_EQ(e, 0.0);
  w.w_v = Matrix(1, 1, 5.0);
  w.scale = 0.5;
  EXPECT_DOUBLE_EQ(causal_linear_attention_forward(w, row({1.5}))(0, 0), 0.5 * (1.5 * 2) * (1.5 * 3) * (5 * 1.5));
}

TEST(LinearAttention, MatchesScalarS6) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    AttentionWeights w{random_matrix(rng, 1, 1), random_matrix(rng, 1, 1), random_matrix(rng, 1, 1), 1.0};
    const Matrix x = random_matrix(rng, 1, 9);
    const Matrix a = causal_linear_attention_forward(w, x);
    const Matrix s = selective_forward(attention_as_s6(w), attention_equivalent_variant(), x);
    for (std::size_t t = 0; t < 9; ++t) EXPECT_NEAR(s(0, t), a(0, t), 1e-12 * std::max(1.0, std::abs(a(0, t))));
  }
}

TEST(SoftmaxAttention, SingleTokenReturnsValue) {
  AttentionWeights w{Matrix(1, 1, 0.3), Matrix(1, 1, -2.0), Matrix(1, 1, 1.7), 1.0};
  EXPECT_NEAR(softmax_attention_forward(w, row({0.8}))(0, 0), 1.7 * 0.8, 1e-15);
}

TEST(SoftmaxAttention, EqualScoresAverageValues) {
  AttentionWeights w{Matrix(1, 1, 0.0), Matrix(1, 1, 1.0), Matrix(1, 1, 1.0), 1.0};
  const Matrix y = softmax_attention_forward(w, row({1, 2, 3, 6}));
  EXPECT_NEAR(y(0, 1), 1.5, 1e-15);
  EXPECT_NEAR(y(0, 3), 3.0, 1e-15);
  EXPECT_EQ(softmax_attention_forward(w, row({0, 0}))(0, 1), 0.0);
}

TEST(SoftmaxAttention, PositionalEncodingIsAddedFirst) {
  AttentionWeights w{Matrix(1, 1, 0.0), Matrix(1, 1, 1.0), Matrix(1, 1, 1.0), 1.0};
  const Matrix pe = Matrix::from_rows({{1.0}, {1.0}, {5.0}});
  const Matrix y = softmax_attention_forward(w, row({0, 0}), &pe);
  EXPECT_NEAR(y(0, 1), 1.0, 1e-15);
}

TEST(SoftmaxAttention, Causal) {
  Rng rng(37);
  AttentionWeights w{random_matrix(rng, 3, 3), random_matrix(rng, 3, 3), random_matrix(rng, 3, 3), 0.5};
  const Matrix x = random_matrix(rng, 3, 6);
  const Matrix base = softmax_attention_forward(w, x);
  const Matrix lin = causal_linear_attention_forward(w, x);
  for (std::size_t t = 0; t < 6; ++t) {
    Matrix xp = x;
    xp(2, t) -= 0.5;
    const Matrix y = softmax_attention_forward(w, xp);
    const Matrix yl = causal_linear_attention_forward(w, xp);
    for (std::size_t s = 0; s < t; ++s) {
      for (std::size_t d = 0; d < 3; ++d) {
        EXPECT_EQ(y(d, s), base(d, s));
        EXPECT_EQ(yl(d, s), lin(d, s));
      }
    }
  }
}

TEST(MambaBlock, PassThroughReturnsInput) {
  const Matrix u = row({0.3, -1.2, 2.5, 0.0});
  const Matrix y = mamba_block_forward(pass_through_block(1.0), u);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(y(0, t), u(0, t) + 0.25, 1e-15);
}

TEST(MambaBlock, ClosedGateLeavesBias) {
  const Matrix y = mamba_block_forward(pass_through_block(0.0), row({0.3, -1.2, 2.5}));
  for (double e : y.entries()) EXPECT_EQ(e, 0.25);
}

TEST(MambaBlock, ResidualAndConv) {
  MambaBlockWeights w = pass_through_block(1.0);
  w.flags.use_residual = true;
  w.flags.use_conv = true;
  w.conv = Matrix::from_rows({{0.0, 1.0}, {0.5, 1.0}});  // x_t + 0.5 x_{t-1} on the data channel
  const Matrix y = mamba_block_forward(w, row({1.0, 2.0}));
  EXPECT_NEAR(y(0, 0), 1.0 + 0.25 + 1.0, 1e-15);
  EXPECT_NEAR(y(0, 1), 2.5 + 0.25 + 2.0, 1e-15);
}

TEST(MambaBlock, IdentityFactoryShapes) {
  const auto w = identity_mamba_block(3, 2, S6Variant::original());
  EXPECT_EQ(w.inner(), 3u);
  EXPECT_EQ(w.outer(), 3u);
  EXPECT_EQ(count_parameters(w), 9u + 3 + 9 + 3 + 9 + 3 + 6 + 6 + 3 + 6 + 6);
}

TEST(Parameters, ShapeArithmetic) {
  EXPECT_EQ(count_parameters(scalar_s6(1, 1, 1, 1)), 4u);
  AttentionWeights a{Matrix(2, 2), Matrix(2, 2), Matrix(2, 2), 1.0};
  EXPECT_EQ(count_parameters(a), 12u);
}

TEST(WeightsJson, RoundTripIsBitExact) {
  Rng rng(41);
  const S6Weights w{random_matrix(rng, 2, 3), random_matrix(rng, 2, 3), random_matrix(rng, 3, 3),
                    random_matrix(rng, 3, 2)};
  const auto v = S6Variant::simplified_poly(4, 2, true);
  S6Variant back_v;
  const auto text = to_json(w, v).dump();
  const S6Weights back = s6_from_json(Json::parse(text), &back_v);
  EXPECT_EQ(back.s_b, w.s_b);
  EXPECT_EQ(back.s_delta, w.s_delta);
  EXPECT_EQ(back.a, w.a);
  EXPECT_EQ(back_v, v);
  EXPECT_EQ(to_json(back, back_v).dump(), text);

  const MambaBlockWeights m = pass_through_block(1.0);
  const auto mt = to_json(m).dump();
  EXPECT_EQ(to_json(mamba_block_from_json(Json::parse(mt))).dump(), mt);

  AttentionWeights a{random_matrix(rng, 2, 2), random_matrix(rng, 2, 2), random_matrix(rng, 2, 2), 0.7};
  const auto at = to_json(a, "softmax_attention").dump();
  EXPECT_EQ(to_json(attention_from_json(Json::parse(at)), "softmax_attention").dump(), at);
}

TEST(WeightsJson, ShapeMismatchIsParseError) {
  Json j = to_json(scalar_s6(1, 1, 1, 1), S6Variant::original());
  j["shapes"]["s_b"][0] = 3;
  EXPECT_THROW(s6_from_json(j), ParseError);
}

TEST(Variant, InvalidDegree) {
  EXPECT_THROW(S6Variant::simplified_poly(0, 3).validate(), InputError);
  EXPECT_THROW(S6Variant::simplified_poly(3, 7).validate(), InputError);
}
