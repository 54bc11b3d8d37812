#include <gtest/gtest.h>

#include "polyssm/construct.hpp"
#include "polyssm/datasets.hpp"

using namespace polyssm;

TEST(Construct, SelectorKeepsOnePosition) {
  const auto s = selector_stack(3, 2);
  const double x[] = {3.0, 5.0, 7.0};
  EXPECT_EQ(s.output_sequence(x), (std::vector<double>{0.0, 5.0, 0.0}));
}

TEST(Construct, DuplicatorSpreadsSpike) {
  const auto s = duplicator_stack(6, 2, 3, 0.0);
  const double x[] = {0.0, 5.0, 0.0, 0.0, 0.0, 0.0};
  EXPECT_EQ(s.output_sequence(x), (std::vector<double>{0.0, 5.0, 5.0, 5.0, 0.0, 0.0}));
}

TEST(Construct, MonomialHandValue) {
  const auto s = construct_monomial_model({2, 3, 2.0}, 6);
  const double x[] = {1.0, 0.5, 0.3, 0.7, 1.1, 0.9};
  EXPECT_NEAR(s(x), 0.25, 1e-15);
  EXPECT_EQ(s.blocks.size(), 3u);
}

TEST(Construct, PowerBeyondLengthUsesPadding) {
  const auto s = construct_monomial_model({5, 6, -1.5}, 8);
  EXPECT_GE(s.padded_length, 5u + 6u + 2u);
  const auto r = verify_construction(s, MultiPoly::variable(8, 5) * MultiPoly::variable(8, 5) *
                                            MultiPoly::variable(8, 5) * MultiPoly::variable(8, 5) *
                                            MultiPoly::variable(8, 5) * MultiPoly::variable(8, 5) * -1.5,
                                     50, 0.5, 1.5, 1e-6, 1);
  EXPECT_TRUE(r.pass) << r.max_rel_err;
}

TEST(Construct, PolynomialHandExample) {
  MultiPoly p(3);
  p.add_term(Monomial::var(1, 2), 1.0);
  p.add_term(Monomial::var(2, 3), 1.0);
  p.add_term(Monomial({{1, 1}, {3, 2}}), -1.5);
  p.add_term(Monomial(), 0.7);
  const auto s = construct_polynomial_model(p, 3);
  EXPECT_EQ(s.blocks.size(), 4u);
  const auto r = verify_construction(s, p, 100, 0.5, 1.5, 1e-9, 2);
  EXPECT_TRUE(r.pass) << r.max_rel_err;
}

TEST(Construct, RandomProductTargets) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MultiPoly p = sample_random_poly_task(5, seed).poly();
    const auto r = verify_construction(construct_polynomial_model(p, 5), p, 50, 0.5, 1.5, 1e-5, seed);
    EXPECT_TRUE(r.pass) << seed << " " << r.max_rel_err;
  }
}

TEST(Construct, RejectsBadSpecs) {
  EXPECT_THROW(construct_monomial_model({0, 2, 1.0}, 4), InputError);
  EXPECT_THROW(construct_monomial_model({5, 2, 1.0}, 4), InputError);
  EXPECT_THROW(construct_monomial_model({1, 0, 1.0}, 4), InputError);
}

TEST(Construct, JsonRoundTripPreservesOutputs) {
  const auto s = construct_monomial_model({1, 2, 3.0}, 4);
  const std::string text = stack_to_json(s).dump();
  const auto back = stack_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(stack_to_json(back).dump(), text);
  const double x[] = {0.9, 1.1, 0.4, 1.3};
  EXPECT_EQ(back(x), s(x));
}

TEST(Construct, VerifyDetectsWrongTarget) {
  const auto s = construct_monomial_model({1, 2, 1.0}, 3);
  const auto r = verify_construction(s, MultiPoly::variable(3, 1), 20, 0.5, 1.5, 1e-6, 0);
  EXPECT_FALSE(r.pass);
  EXPECT_THROW(verify_construction(s, MultiPoly::variable(4, 1), 1, 0.5, 1.5, 1e-6, 0), DimensionError);
}
