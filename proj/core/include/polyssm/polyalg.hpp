#pragma once

// Sparse multivariate polynomials over variables x_1..x_L and symbolic
// unrolling of scalar sequence layers into them.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "polyssm/layers.hpp"

namespace polyssm {

// Product of variable powers, stored as (variable, power) pairs sorted by
// variable index. Variables are 1-based; powers are positive.
class Monomial {
 public:
  using Exponent = std::pair<std::uint32_t, std::uint32_t>;

  Monomial() = default;
  explicit Monomial(std::vector<Exponent> exps);
  static Monomial var(std::uint32_t index, std::uint32_t power = 1);

  const std::vector<Exponent>& exponents() const noexcept { return exps_; }
  std::uint32_t total_degree() const noexcept;
  std::uint32_t power_of(std::uint32_t var) const noexcept;
  std::uint32_t max_var() const noexcept { return exps_.empty() ? 0 : exps_.back().first; }
  bool is_constant() const noexcept { return exps_.empty(); }

  Monomial operator*(const Monomial& o) const;
  double eval(std::span<const double> x) const;
  std::string to_string() const;

  bool operator==(const Monomial&) const = default;

 private:
  std::vector<Exponent> exps_;
};

// Graded order: lower total degree first; within a degree, the monomial with
// the larger power of the lowest-indexed differing variable comes first.
struct GradedLex {
  bool operator()(const Monomial& a, const Monomial& b) const noexcept;
};

class MultiPoly {
 public:
  using Terms = std::map<Monomial, double, GradedLex>;
  static constexpr double kPruneBelow = 1e-15;

  explicit MultiPoly(std::size_t n_vars = 0) : n_vars_(n_vars) {}
  static MultiPoly constant(std::size_t n_vars, double c);
  static MultiPoly variable(std::size_t n_vars, std::uint32_t index);

  std::size_t n_vars() const noexcept { return n_vars_; }
  const Terms& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  double coeff(const Monomial& m) const;

  // Accumulates c into the coefficient of m, dropping it if it falls below
  // the pruning threshold.
  void add_term(const Monomial& m, double c);

  MultiPoly operator+(const MultiPoly& o) const;
  MultiPoly operator-(const MultiPoly& o) const;
  MultiPoly operator*(const MultiPoly& o) const;
  MultiPoly operator*(double s) const;

  double eval(std::span<const double> x) const;
  std::uint32_t max_total_degree() const noexcept;
  std::size_t n_monomials() const noexcept { return terms_.size(); }
  std::string to_string() const;

  bool operator==(const MultiPoly&) const = default;

 private:
  std::size_t n_vars_;
  Terms terms_;
};

enum class PolyOp { Add, Mul, Scale };

MultiPoly poly_arith(PolyOp kind, const MultiPoly& p, const MultiPoly& q);
MultiPoly poly_arith(PolyOp kind, const MultiPoly& p, double s);
double poly_eval(const MultiPoly& p, std::span<const double> x);

struct PolyStats {
  std::uint32_t max_total_degree = 0;
  std::size_t n_monomials = 0;
};
PolyStats poly_stats(const MultiPoly& p);

nlohmann::json poly_to_json(const MultiPoly& p);
MultiPoly poly_from_json(const nlohmann::json& j);

// Unrolls h_t = (S_delta x_t + A) h_{t-1} + (S_B x_t) x_t, y_t = (S_C x_t) h_t
// for a single channel with one state. Element t-1 is the polynomial of y_t.
std::vector<MultiPoly> extract_s6_channel_poly(const S6Weights& w, std::size_t L,
                                               const S6Variant& variant = S6Variant::simplified_poly(3, 3, true));

// y_L of a scalar causal linear-attention head.
MultiPoly extract_attention_poly(const AttentionWeights& w, std::size_t L);

// y_L of a diagonal LTI SSM with a scalar input: sum_j (sum_k c_k a_k^(L-j) b_k) x_j.
MultiPoly extract_lti_ssm_poly(const Matrix& a_bar, const Matrix& b_bar, const Matrix& c, std::size_t L);

// Applies one scalar causal linear-attention head to per-position
// polynomials. With `last_only` only the final position is formed (the other
// entries are left zero).
std::vector<MultiPoly> attention_layer_symbolic(const std::vector<MultiPoly>& inputs, const AttentionWeights& w,
                                                bool last_only = false);

// Polynomial of the last output of `layers` stacked attention heads applied to x_1..x_L.
MultiPoly stacked_attention_poly(std::size_t L, std::span<const AttentionWeights> layers);

// Smallest N with 3^N >= degree: the fewest stacked attention layers whose
// output could reach that degree.
std::size_t attention_layers_needed(std::uint64_t degree);

}  // namespace polyssm
