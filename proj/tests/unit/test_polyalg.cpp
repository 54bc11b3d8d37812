#include <gtest/gtest.h>

#include <cmath>

#include "polyssm/polyalg.hpp"
#include "polyssm/rng.hpp"

using namespace polyssm;

namespace {

MultiPoly random_poly(Rng& rng, std::size_t n_vars, int terms, std::uint32_t max_pow) {
  MultiPoly p(n_vars);
  for (int t = 0; t < terms; ++t) {
    std::vector<Monomial::Exponent> e;
    for (std::uint32_t v = 1; v <= n_vars; ++v) {
      const auto pw = static_cast<std::uint32_t>(rng.uniform_int(0, max_pow));
      if (pw) e.emplace_back(v, pw);
    }
    p.add_term(Monomial(e), rng.uniform(-2.0, 2.0));
  }
  return p;
}

std::vector<double> random_point(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.uniform(-1.2, 1.2);
  return x;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(Monomial, ProductMergesPowers) {
  const Monomial a({{1, 2}, {3, 1}});
  const Monomial b({{2, 1}, {3, 2}});
  const Monomial c = a * b;
  EXPECT_EQ(c.total_degree(), 6u);
  EXPECT_EQ(c.power_of(3), 3u);
  EXPECT_EQ(c.max_var(), 3u);
  EXPECT_EQ(c.to_string(), "x1^2*x2*x3^3");
  const double x[] = {2.0, 3.0, 0.5};
  EXPECT_DOUBLE_EQ(c.eval(x), 4.0 * 3.0 * 0.125);
}

TEST(Monomial, ZeroVariableRejectedZeroPowerDropped) {
  EXPECT_THROW(Monomial({{0, 1}}), InputError);
  EXPECT_EQ(Monomial({{1, 0}, {2, 1}}), Monomial::var(2));
}

TEST(GradedLex, DegreeThenLowestVariable) {
  GradedLex less;
  EXPECT_TRUE(less(Monomial(), Monomial::var(3)));
  EXPECT_TRUE(less(Monomial::var(2, 2), Monomial({{1, 1}, {2, 2}})));
  EXPECT_TRUE(less(Monomial::var(1, 2), Monomial({{1, 1}, {2, 1}})));
  EXPECT_FALSE(less(Monomial({{1, 1}, {2, 1}}), Monomial::var(1, 2)));
}

TEST(MultiPoly, ArithmeticMatchesEvaluation) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const MultiPoly p = random_poly(rng, n, 5, 3), q = random_poly(rng, n, 4, 2);
    const auto x = random_point(rng, n);
    EXPECT_LE(rel((p + q).eval(x), p.eval(x) + q.eval(x)), 1e-12);
    EXPECT_LE(rel((p - q).eval(x), p.eval(x) - q.eval(x)), 1e-12);
    EXPECT_LE(rel((p * q).eval(x), p.eval(x) * q.eval(x)), 1e-12);
    EXPECT_LE(rel((p * 2.5).eval(x), 2.5 * p.eval(x)), 1e-12);
  }
}

TEST(MultiPoly, MultiplicationWithManyVariablesUsesGeneralPath) {
  Rng rng(4);
  const MultiPoly p = random_poly(rng, 20, 6, 2), q = random_poly(rng, 20, 6, 2);
  const auto x = random_point(rng, 20);
  EXPECT_LE(rel((p * q).eval(x), p.eval(x) * q.eval(x)), 1e-12);
}

TEST(MultiPoly, CancellationPrunes) {
  const MultiPoly x1 = MultiPoly::variable(2, 1);
  EXPECT_TRUE((x1 - x1).is_zero());
  MultiPoly p(2);
  p.add_term(Monomial::var(2), 1e-16);
  EXPECT_TRUE(p.is_zero());
}

TEST(MultiPoly, BinomialCoefficients) {
  const MultiPoly s = MultiPoly::variable(2, 1) + MultiPoly::variable(2, 2);
  const MultiPoly cube = s * s * s;
  EXPECT_EQ(cube.n_monomials(), 4u);
  EXPECT_EQ(cube.coeff(Monomial({{1, 2}, {2, 1}})), 3.0);
  EXPECT_EQ(cube.max_total_degree(), 3u);
}

TEST(MultiPoly, VariableOutOfRangeAndShapeErrors) {
  EXPECT_THROW(MultiPoly::variable(2, 3), InputError);
  EXPECT_THROW(MultiPoly(2) + MultiPoly(3), DimensionError);
  const double x[] = {1.0};
  EXPECT_THROW(MultiPoly::variable(2, 1).eval(x), DimensionError);
}

TEST(MultiPoly, OpDispatchAndStats) {
  const MultiPoly a = MultiPoly::variable(1, 1);
  const MultiPoly b = poly_arith(PolyOp::Mul, a, a);
  EXPECT_EQ(poly_stats(b).max_total_degree, 2u);
  EXPECT_EQ(poly_stats(poly_arith(PolyOp::Scale, b, 3.0)).n_monomials, 1u);
  const double x[] = {2.0};
  EXPECT_EQ(poly_eval(poly_arith(PolyOp::Add, a, b), x), 6.0);
  EXPECT_THROW(poly_arith(PolyOp::Scale, a, a), InputError);
}

TEST(MultiPoly, JsonRoundTripIsBitExact) {
  Rng rng(5);
  const MultiPoly p = random_poly(rng, 4, 8, 3);
  const std::string text = poly_to_json(p).dump();
  const MultiPoly back = poly_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, p);
  EXPECT_EQ(poly_to_json(back).dump(), text);
  EXPECT_THROW(poly_from_json(nlohmann::json::parse(R"({"n_vars": 2, "terms": [{"exps": [[3, 1]], "coeff": 1}]})")),
               ParseError);
}

TEST(Extraction, S6UnitWeightsDegree) {
  const S6Weights w{Matrix(1, 1, 1.0), Matrix(1, 1, 1.0), Matrix(1, 1, 1.0), Matrix(1, 1, 0.0)};
  for (std::size_t L = 1; L <= 8; ++L) {
    const auto polys = extract_s6_channel_poly(w, L);
    EXPECT_EQ(polys.back().max_total_degree(), L + 2);
  }
}

TEST(Extraction, S6MatchesForwardAtEveryPosition) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const S6Weights w{Matrix(1, 1, rng.uniform(-1, 1)), Matrix(1, 1, rng.uniform(-1, 1)),
                      Matrix(1, 1, rng.uniform(-1, 1)), Matrix(1, 1, rng.uniform(-1, 1))};
    const std::size_t L = 2 + trial % 7;
    const auto polys = extract_s6_channel_poly(w, L);
    Matrix x(1, L);
    for (double& v : x.entries()) v = rng.uniform(-1, 1);
    const Matrix y = selective_forward(w, S6Variant::simplified_poly(3, 3, true), x);
    for (std::size_t t = 0; t < L; ++t) {
      EXPECT_LE(rel(polys[t].eval(x.entries()), y(0, t)), 1e-12);
    }
  }
}

TEST(Extraction, S6RejectsUnsupportedConfigurations) {
  const S6Weights w{Matrix(1, 2), Matrix(1, 2), Matrix(1, 2), Matrix(2, 1)};
  EXPECT_THROW(extract_s6_channel_poly(w, 3), UnsupportedError);
  const S6Weights s{Matrix(1, 1), Matrix(1, 1), Matrix(1, 1), Matrix(1, 1)};
  EXPECT_THROW(extract_s6_channel_poly(s, 3, S6Variant::original()), UnsupportedError);
}

TEST(Extraction, AttentionIsCubic) {
  const AttentionWeights w{Matrix(1, 1, 0.7), Matrix(1, 1, -1.1), Matrix(1, 1, 0.4), 1.0};
  for (std::size_t L = 1; L <= 8; ++L) {
    const MultiPoly p = extract_attention_poly(w, L);
    EXPECT_EQ(p.max_total_degree(), 3u);
    EXPECT_EQ(p.n_monomials(), L);
  }
}

TEST(Extraction, LtiIsLinearWithGeometricCoefficients) {
  const Matrix a = Matrix::from_rows({{0.5}, {-0.25}});
  const Matrix b = Matrix::from_rows({{1.0}, {2.0}});
  const Matrix c = Matrix::from_rows({{1.0}, {1.0}});
  const MultiPoly p = extract_lti_ssm_poly(a, b, c, 4);
  EXPECT_EQ(p.max_total_degree(), 1u);
  EXPECT_DOUBLE_EQ(p.coeff(Monomial::var(1)), 0.125 + 2.0 * -0.015625);
  EXPECT_DOUBLE_EQ(p.coeff(Monomial::var(4)), 3.0);
}

TEST(Extraction, StackedAttentionDegreeIsAtMostThreeToTheN) {
  const AttentionWeights w{Matrix(1, 1, 1.0), Matrix(1, 1, 1.0), Matrix(1, 1, 1.0), 1.0};
  std::uint32_t cap = 1;
  for (std::size_t n = 1; n <= 3; ++n) {
    cap *= 3;
    const std::vector<AttentionWeights> layers(n, w);
    EXPECT_EQ(stacked_attention_poly(4, layers).max_total_degree(), cap);
  }
}

TEST(Extraction, LayersNeeded) {
  EXPECT_EQ(attention_layers_needed(1), 0u);
  EXPECT_EQ(attention_layers_needed(3), 1u);
  EXPECT_EQ(attention_layers_needed(4), 2u);
  EXPECT_EQ(attention_layers_needed(10), 3u);
}
