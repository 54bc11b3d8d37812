#include "polyssm/genbound.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "polyssm/weights_io.hpp"

namespace polyssm {

void ClassifierWeights::validate() const {
  s6.validate();
  if (w.cols() != s6.channels() || w.rows() == 0) {
    throw DimensionError("classifier head " + w.shape_string() + " for " + std::to_string(s6.channels()) +
                         " channels");
  }
}

namespace {

void check_input(const ClassifierWeights& w, const Matrix& x) {
  if (x.rows() != w.s6.channels() || x.cols() == 0) {
    throw DimensionError("classifier input " + x.shape_string() + " for " + std::to_string(w.s6.channels()) +
                         " channels");
  }
}

// delta[k * R + r] = softplus(S_delta row r . X_k)
std::vector<double> step_sizes(const ClassifierWeights& w, const Matrix& x) {
  const std::size_t R = w.s6.s_delta.rows();
  std::vector<double> delta(x.cols() * R);
  for (std::size_t k = 0; k < x.cols(); ++k) {
    for (std::size_t r = 0; r < R; ++r) {
      double z = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) z += w.s6.s_delta(r, i) * x(i, k);
      delta[k * R + r] = softplus(z);
    }
  }
  return delta;
}

}  // namespace

std::vector<double> classifier_logits(const ClassifierWeights& w, const Matrix& x) {
  w.validate();
  check_input(w, x);
  const std::size_t D = w.s6.channels();
  const std::size_t N = w.s6.state_size();
  const std::size_t R = w.s6.s_delta.rows();
  const std::size_t L = x.cols();
  const std::vector<double> delta = step_sizes(w, x);

  std::vector<double> c_last(N, 0.0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < D; ++i) c_last[n] += w.s6.s_c(n, i) * x(i, L - 1);

  // per-channel readout g_d = (S_C X_L)^T sum_i (prod_{k>i} A_bar_dk) (S_B X_i) X_di
  std::vector<double> g(D, 0.0);
  std::vector<double> prod(N);
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t i = 0; i < L; ++i) {
      std::fill(prod.begin(), prod.end(), 1.0);
      for (std::size_t k = i + 1; k < L; ++k) {
        const double dk = delta[k * R + (R == 1 ? 0 : d)];
        for (std::size_t n = 0; n < N; ++n) prod[n] *= std::exp(dk * w.s6.a(d, n));
      }
      for (std::size_t n = 0; n < N; ++n) {
        double b = 0.0;
        for (std::size_t j = 0; j < D; ++j) b += w.s6.s_b(n, j) * x(j, i);
        g[d] += c_last[n] * prod[n] * b * x(d, i);
      }
    }
  }
  std::vector<double> logits(w.classes(), 0.0);
  for (std::size_t c = 0; c < w.classes(); ++c)
    for (std::size_t d = 0; d < D; ++d) logits[c] += w.w(c, d) * g[d];
  return logits;
}

NormProfile norm_profile(const ClassifierWeights& w) {
  NormProfile p;
  p.rho_w = frobenius_norm(w.w);
  p.rho_a = max_abs(w.s6.a);
  p.rho_b = max_row_norm(w.s6.s_b);
  p.rho_c = frobenius_norm(w.s6.s_c);
  p.rho_delta = spectral_norm(w.s6.s_delta);
  p.gamma_w = p.rho_w * p.rho_a * p.rho_b * p.rho_c * p.rho_delta;
  return p;
}

double contraction_K(const ClassifierWeights& w, std::span<const LabeledSequence> data) {
  if (data.empty()) throw InputError("contraction_K: empty dataset");
  w.validate();
  const std::size_t R = w.s6.s_delta.rows();
  double worst = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const Matrix& x = data[s].x;
    check_input(w, x);
    const std::vector<double> delta = step_sizes(w, x);
    for (std::size_t k = 0; k < x.cols(); ++k) {
      for (std::size_t d = 0; d < w.s6.channels(); ++d) {
        const double dk = delta[k * R + (R == 1 ? 0 : d)];
        for (std::size_t n = 0; n < w.s6.state_size(); ++n) {
          const double abar = std::abs(std::exp(dk * w.s6.a(d, n)));
          if (!(abar + 1e-9 < 1.0)) {
            throw ContractionError("contraction fails: |A_bar| = " + std::to_string(abar) + " at sample " +
                                   std::to_string(s) + ", channel " + std::to_string(d) + ", position " +
                                   std::to_string(k + 1));
          }
          worst = std::max(worst, abar);
        }
      }
    }
  }
  return worst + 1e-9;
}

double empirical_margin_error(const ClassifierWeights& w, std::span<const LabeledSequence> data, double gamma) {
  if (!(gamma > 0.0)) throw InputError("margin gamma must be positive");
  if (data.empty()) return 0.0;
  std::size_t violations = 0;
  for (const auto& s : data) {
    const std::vector<double> f = classifier_logits(w, s.x);
    if (s.label >= f.size()) {
      throw InputError("label " + std::to_string(s.label) + " for " + std::to_string(f.size()) + " classes");
    }
    double rival = -INFINITY;
    for (std::size_t c = 0; c < f.size(); ++c)
      if (c != s.label) rival = std::max(rival, f[c]);
    if (rival + gamma >= f[s.label]) ++violations;
  }
  return static_cast<double>(violations) / static_cast<double>(data.size());
}

double data_norm(std::span<const LabeledSequence> data) {
  if (data.empty()) return 0.0;
  const Matrix& first = data.front().x;
  Matrix acc(first.rows(), first.cols());
  for (const auto& s : data) {
    require_same_shape(acc, s.x, "data_norm");
    for (std::size_t i = 0; i < acc.size(); ++i) acc.entries()[i] += s.x.entries()[i] * s.x.entries()[i];
  }
  return std::sqrt(max_abs(acc));
}

BoundReport evaluate_bound(const NormProfile& profile, double K, const BoundInputs& in, double norm) {
  if (!(K > 0.0 && K < 1.0)) throw ContractionError("bound requires 0 < K < 1, got K = " + std::to_string(K));
  if (in.m == 0) throw InputError("bound requires m >= 1");
  if (!(in.gamma > 0.0)) throw InputError("bound requires gamma > 0");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw InputError("bound requires 0 < delta < 1");
  if (in.D == 0 || in.N == 0 || in.L == 0 || in.C == 0) throw InputError("bound requires positive D, N, L, C");
  if (!(norm >= 0.0)) throw InputError("data norm must be non-negative");

  const double m = static_cast<double>(in.m);
  const double D = static_cast<double>(in.D);
  const double N = static_cast<double>(in.N);
  const double L = static_cast<double>(in.L);
  const double C = static_cast<double>(in.C);
  const double G = profile.gamma_w;

  BoundReport r;
  r.profile = profile;
  r.inputs = in;
  r.K = K;
  r.data_norm = norm;
  const double log_factor = 1.0 + std::sqrt(2.0 * std::log(4.0 * L * C * std::pow(D, 4) * N));
  r.term1 = 2.0 * std::numbers::sqrt2 / (in.gamma * m) * (G + 1.0 / (D * D * N * N)) * D * D * log_factor * norm * K /
            ((K - 1.0) * (K - 1.0));
  r.term2 = 3.0 * std::sqrt((std::log(2.0 / in.delta) + 2.0 * std::log(D * D * N * N * G + 2.0)) / (2.0 * m));
  r.bound = r.term1 + r.term2;
  return r;
}

std::vector<BoundReport> bound_length_sweep(const NormProfile& profile, double K, const BoundInputs& inputs,
                                            double norm, std::span<const std::size_t> lengths) {
  std::vector<BoundReport> out;
  for (std::size_t L : lengths) {
    BoundInputs in = inputs;
    in.L = L;
    out.push_back(evaluate_bound(profile, K, in, norm));
  }
  return out;
}

nlohmann::json bound_report_to_json(const BoundReport& r) {
  nlohmann::json j = {
      {"norms",
       {{"rho_W", r.profile.rho_w},
        {"rho_A", r.profile.rho_a},
        {"rho_B", r.profile.rho_b},
        {"rho_C", r.profile.rho_c},
        {"rho_Delta", r.profile.rho_delta},
        {"Gamma", r.profile.gamma_w}}},
      {"K", r.K},
      {"K_source", r.k_empirical ? "empirical (max |A_bar| on the dataset + 1e-9)" : "given"},
      {"gamma", r.inputs.gamma},
      {"delta", r.inputs.delta},
      {"m", r.inputs.m},
      {"D", r.inputs.D},
      {"N", r.inputs.N},
      {"L", r.inputs.L},
      {"C", r.inputs.C},
      {"data_norm", r.data_norm},
      {"term1", r.term1},
      {"term2", r.term2},
      {"bound", r.bound},
      {"notes",
       {"rho_B is the maximum row l2 norm of S_B",
        "the logarithm is natural and its argument is 4*L*C*D^4*N",
        "margin violations include ties"}}};
  if (r.margin_error >= 0.0) {
    j["margin_error"] = r.margin_error;
    j["certified_error"] = r.margin_error + r.bound;
  }
  return j;
}

nlohmann::json classifier_to_json(const ClassifierWeights& w) {
  nlohmann::json j = to_json(w.s6, S6Variant::simplified_nonpoly());
  j["layer_type"] = "s6_classifier";
  j["shapes"]["w"] = {w.w.rows(), w.w.cols()};
  j["entries"]["w"] = std::vector<double>(w.w.entries().begin(), w.w.entries().end());
  return j;
}

ClassifierWeights classifier_from_json(const nlohmann::json& j) {
  if (layer_type_of(j) != "s6_classifier") {
    throw ParseError("weights: expected layer_type 's6_classifier', got '" + layer_type_of(j) + "'");
  }
  nlohmann::json s6 = j;
  s6["layer_type"] = "s6";
  ClassifierWeights w;
  w.s6 = s6_from_json(s6);
  try {
    const auto& shape = j.at("shapes").at("w");
    w.w = Matrix(shape.at(0).get<std::size_t>(), shape.at(1).get<std::size_t>(),
                 j.at("entries").at("w").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("classifier head: ") + e.what());
  }
  w.validate();
  return w;
}

}  // namespace polyssm
