#pragma once

// Norm-based generalization certificate for a single selective layer with a
// linear class head:
//   f^c(X) = sum_d W[c,d] (S_C X_L)^T sum_i (prod_{k>i} A_bar[d,k]) (S_B X_i) X[d,i],
//   A_bar[d,k] = exp(delta_k A[d,:]), delta_k = softplus(S_delta X_k).

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "polyssm/layers.hpp"

namespace polyssm {

struct ClassifierWeights {
  S6Weights s6;
  Matrix w;  // C x D

  std::size_t classes() const noexcept { return w.rows(); }
  void validate() const;
};

struct NormProfile {
  double rho_w = 0.0;      // Frobenius norm of W
  double rho_a = 0.0;      // max |A|
  double rho_b = 0.0;      // max row l2 norm of S_B
  double rho_c = 0.0;      // Frobenius norm of S_C
  double rho_delta = 0.0;  // l2 (spectral) norm of S_delta
  double gamma_w = 0.0;    // product of the five
};

struct BoundInputs {
  double gamma = 1.0;  // margin
  double delta = 0.1;  // confidence
  std::size_t m = 1;
  std::size_t D = 1;
  std::size_t N = 1;
  std::size_t L = 1;
  std::size_t C = 2;
};

struct BoundReport {
  NormProfile profile;
  BoundInputs inputs;
  double K = 0.0;
  double data_norm = 0.0;
  double term1 = 0.0;
  double term2 = 0.0;
  double bound = 0.0;
  double margin_error = -1.0;  // negative when not measured
  bool k_empirical = false;
};

struct LabeledSequence {
  Matrix x;  // D x L
  std::size_t label = 0;
};

std::vector<double> classifier_logits(const ClassifierWeights& w, const Matrix& x);

NormProfile norm_profile(const ClassifierWeights& w);

// Largest |A_bar| over the data plus 1e-9; throws ContractionError naming
// the offending sample, channel and position when that reaches 1.
double contraction_K(const ClassifierWeights& w, std::span<const LabeledSequence> data);

// Fraction of samples whose true-class logit does not beat every other class
// by more than gamma (ties count as violations).
double empirical_margin_error(const ClassifierWeights& w, std::span<const LabeledSequence> data, double gamma);

// sqrt(max over channel t, position k of sum over samples of X[t,k]^2).
double data_norm(std::span<const LabeledSequence> data);

BoundReport evaluate_bound(const NormProfile& profile, double K, const BoundInputs& inputs, double data_norm);

std::vector<BoundReport> bound_length_sweep(const NormProfile& profile, double K, const BoundInputs& inputs,
                                            double data_norm, std::span<const std::size_t> lengths);

nlohmann::json bound_report_to_json(const BoundReport& r);

nlohmann::json classifier_to_json(const ClassifierWeights& w);
ClassifierWeights classifier_from_json(const nlohmann::json& j);

}  // namespace polyssm
