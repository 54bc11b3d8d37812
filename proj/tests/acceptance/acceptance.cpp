// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "polyssm/construct.hpp"
#include "polyssm/datasets.hpp"
#include "polyssm/genbound.hpp"
#include "polyssm/polyalg.hpp"
#include "polyssm/rng.hpp"
#include "polyssm/trainer.hpp"

using namespace polyssm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

double rel_err_floor(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1.0); }

Matrix uniform_matrix(Rng& rng, std::size_t r, std::size_t c, double lo, double hi) {
  Matrix m(r, c);
  for (double& v : m.entries()) v = rng.uniform(lo, hi);
  return m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// 1. Extracted polynomials evaluate to the numeric forward's last output.
Outcome oracle_equivalence() {
  Rng rng(101);
  double worst_s6 = 0, worst_att = 0, worst_lti = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t L = 2 + static_cast<std::size_t>(draw % 7);
    const Matrix x = uniform_matrix(rng, 1, L, -1, 1);

    const S6Weights s6{uniform_matrix(rng, 1, 1, -1, 1), uniform_matrix(rng, 1, 1, -1, 1),
                       uniform_matrix(rng, 1, 1, -1, 1), uniform_matrix(rng, 1, 1, -1, 1)};
    const auto variant = S6Variant::simplified_poly(3, 3, true);
    const double y_s6 = selective_forward(s6, variant, x)(0, L - 1);
    worst_s6 = std::max(worst_s6, rel_err_floor(extract_s6_channel_poly(s6, L, variant).back().eval(x.entries()), y_s6));

    const AttentionWeights att{uniform_matrix(rng, 1, 1, -1, 1), uniform_matrix(rng, 1, 1, -1, 1),
                               uniform_matrix(rng, 1, 1, -1, 1), 1.0};
    const double y_att = causal_linear_attention_forward(att, x)(0, L - 1);
    worst_att = std::max(worst_att, rel_err_floor(extract_attention_poly(att, L).eval(x.entries()), y_att));

    const std::size_t n = 1 + static_cast<std::size_t>(draw % 3);
    const Matrix a = uniform_matrix(rng, n, 1, -0.95, 0.95), b = uniform_matrix(rng, n, 1, -1, 1),
                 c = uniform_matrix(rng, n, 1, -1, 1);
    const double y_lti = lti_ssm_forward(a, b, c, {x.entries().begin(), x.entries().end()}).back();
    worst_lti = std::max(worst_lti, rel_err_floor(extract_lti_ssm_poly(a, b, c, L).eval(x.entries()), y_lti));
  }
  const double worst = std::max({worst_s6, worst_att, worst_lti});
  return {worst <= 1e-9, "max rel err s6 " + fmt(worst_s6) + ", linear attention " + fmt(worst_att) + ", lti " +
                             fmt(worst_lti) + " (tol 1e-9, 100 draws each, L 2..8)"};
}

// 2. Degree separation between S6, attention and LTI layers.
Outcome degree_separation() {
  Rng rng(202);
  bool ok = true;
  std::string failure;
  for (std::size_t L = 1; L <= 8 && ok; ++L) {
    const S6Weights s6{uniform_matrix(rng, 1, 1, 0.2, 1), uniform_matrix(rng, 1, 1, 0.2, 1),
                       uniform_matrix(rng, 1, 1, 0.2, 1), uniform_matrix(rng, 1, 1, -1, 1)};
    const AttentionWeights att{uniform_matrix(rng, 1, 1, 0.2, 1), uniform_matrix(rng, 1, 1, 0.2, 1),
                               uniform_matrix(rng, 1, 1, 0.2, 1), 1.0};
    const Matrix a = uniform_matrix(rng, 2, 1, 0.2, 0.9), b = uniform_matrix(rng, 2, 1, 0.2, 1),
                 c = uniform_matrix(rng, 2, 1, 0.2, 1);
    const auto d_s6 = extract_s6_channel_poly(s6, L).back().max_total_degree();
    const auto d_att = extract_attention_poly(att, L).max_total_degree();
    const auto d_lti = extract_lti_ssm_poly(a, b, c, L).max_total_degree();
    if (d_s6 != L + 2 || d_att != 3 || d_lti != 1) {
      ok = false;
      failure = "L=" + std::to_string(L) + ": s6 " + std::to_string(d_s6) + ", attention " + std::to_string(d_att) +
                ", lti " + std::to_string(d_lti);
    }
  }
  for (std::size_t L = 1; L <= 6 && ok; ++L) {
    std::uint64_t cap = 1;
    for (std::size_t n = 1; n <= 3 && ok; ++n) {
      cap *= 3;
      std::vector<AttentionWeights> layers;
      for (std::size_t k = 0; k < n; ++k) {
        layers.push_back({uniform_matrix(rng, 1, 1, 0.2, 1), uniform_matrix(rng, 1, 1, 0.2, 1),
                          uniform_matrix(rng, 1, 1, 0.2, 1), 1.0});
      }
      const std::uint64_t d = stacked_attention_poly(L, layers).max_total_degree();
      // Fewer layers than log3(L+2) cannot reach the S6 degree.
      const bool too_shallow = cap < L + 2;
      if (d > cap || (too_shallow && d >= L + 2) || (too_shallow != (n < attention_layers_needed(L + 2)))) {
        ok = false;
        failure = "stacked attention N=" + std::to_string(n) + ", L=" + std::to_string(L) + ": degree " +
                  std::to_string(d);
      }
    }
  }
  return {ok, ok ? "S6 degree L+2 for L 1..8 (the L+3 reading is off by one), attention 3, LTI 1, "
                   "N-stacked attention <= 3^N for N<=3, L<=6"
                 : failure};
}

// 3. A scalar attention head is an S6 layer with S_delta = 0, A = 1.
Outcome attention_s6_equivalence() {
  Rng rng(303);
  double worst = 0;
  for (int head = 0; head < 100; ++head) {
    const AttentionWeights att{uniform_matrix(rng, 1, 1, -1, 1), uniform_matrix(rng, 1, 1, -1, 1),
                               uniform_matrix(rng, 1, 1, -1, 1), rng.uniform(0.5, 2.0)};
    const S6Weights s6 = attention_as_s6(att);
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t L = 1 + static_cast<std::size_t>(rng.uniform_int(0, 15));
      const Matrix x = uniform_matrix(rng, 1, L, -1, 1);
      const Matrix ya = causal_linear_attention_forward(att, x);
      const Matrix ys = selective_forward(s6, attention_equivalent_variant(), x);
      for (std::size_t t = 0; t < L; ++t) worst = std::max(worst, rel_err_floor(ys(0, t), ya(0, t)));
    }
  }
  return {worst <= 1e-9, "max rel err " + fmt(worst) + " over 100 heads x 5 inputs, L <= 16 (tol 1e-9)"};
}

// 4. Compiled Mamba stacks reproduce monomials and polynomials.
Outcome constructions() {
  double worst_mono = 0, worst_poly = 0;
  std::size_t max_blocks = 0;
  bool ok = true;
  for (std::uint32_t j = 1; j <= 5; ++j) {
    for (std::uint32_t P = 1; P <= 6; ++P) {
      const double c = 0.5 + 0.25 * (j + P);
      const ConstructedStack s = construct_monomial_model({j, P, c}, 8);
      MultiPoly target(8);
      target.add_term(Monomial::var(j, P), c);
      const VerifyReport r = verify_construction(s, target, 200, 0.5, 1.5, 1e-6, 1000 * j + P);
      worst_mono = std::max(worst_mono, r.max_rel_err);
      max_blocks = std::max(max_blocks, s.blocks.size());
      ok = ok && r.pass;
    }
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MultiPoly target = sample_random_poly_task(5, 5000 + seed).poly();
    const ConstructedStack s = construct_polynomial_model(target, 5);
    const VerifyReport r = verify_construction(s, target, 200, 0.5, 1.5, 1e-5, seed);
    worst_poly = std::max(worst_poly, r.max_rel_err);
    max_blocks = std::max(max_blocks, s.blocks.size());
    ok = ok && r.pass;
  }
  ok = ok && max_blocks <= 4;
  return {ok, "monomials j<=5, P<=6, L=8: max rel err " + fmt(worst_mono) + " (tol 1e-6); 20 random polynomials, "
              "L=5: " + fmt(worst_poly) + " (tol 1e-5); at most " + std::to_string(max_blocks) + " blocks"};
}

double mean_best(const std::vector<SweepRow>& rows, const std::string& id) {
  for (const auto& r : rows)
    if (r.model.id() == id) return r.mean_best;
  throw std::runtime_error("sweep row " + id + " missing");
}

// 5. Training trends: S6 beats attention on both synthetic tasks.
Outcome training_trends() {
  SweepSpec cir;
  cir.task = TaskKind::CountInRow;
  cir.L = 20;
  cir.models = count_in_row_grid(20);
  cir.train.epochs = 100;
  const auto c_rows = run_sweep(cir);
  const double s6_acc = c_rows[0].mean_best, att_acc = c_rows[1].mean_best;

  SweepSpec reg;
  reg.task = TaskKind::Regression;
  reg.L = 5;
  reg.models = regression_grid(5);
  reg.train.epochs = 200;
  const auto r_rows = run_sweep(reg);

  bool ok = s6_acc >= 0.80 && s6_acc - att_acc >= 0.15;
  std::string detail = "count-in-row acc S6 " + fmt(s6_acc) + " vs attention " + fmt(att_acc);
  for (std::size_t D : {4u, 8u}) {
    // Rows per width: S6 without PE, S6 with PE, attention with PE.
    const std::size_t base = D == 4 ? 0 : 3;
    const double s6 = std::min(r_rows[base].mean_best, r_rows[base + 1].mean_best);
    const double att = r_rows[base + 2].mean_best;
    const double gap = (att - s6) / att;
    ok = ok && gap >= 0.20;
    detail += "; regression D=" + std::to_string(D) + " MSE S6 " + fmt(s6) + " (no PE " + fmt(r_rows[base].mean_best) +
              ") vs attention " + fmt(att) + ", gap " + fmt(100 * gap) + "%";
  }
  return {ok, detail};
}

// 6. Generalization bound against an independent evaluation.
Outcome bound_certificate() {
  NormProfile p;
  p.gamma_w = 1.0;
  BoundInputs in;
  in.gamma = 1.0;
  in.delta = 0.1;
  in.m = 1000;
  in.D = 2;
  in.N = 1;
  in.L = 16;
  in.C = 2;
  const double K = 0.5, norm = std::sqrt(1000.0);

  const long double D2 = 4.0L, N2 = 1.0L;
  const long double first = 2.0L * std::sqrt(2.0L) / 1000.0L * (1.0L + 1.0L / (D2 * N2)) * D2 *
                            (1.0L + std::sqrt(2.0L * std::log(4.0L * 16 * 2 * 16 * 1))) * std::sqrt(1000.0L) *
                            (0.5L / 0.25L);
  const long double second = 3.0L * std::sqrt((std::log(20.0L) + 2.0L * std::log(D2 * N2 + 2.0L)) / 2000.0L);
  const BoundReport r = evaluate_bound(p, K, in, norm);
  const double ref_err = std::max(rel_err(r.term1, static_cast<double>(first)),
                                  std::max(rel_err(r.term2, static_cast<double>(second)),
                                           rel_err(r.bound, static_cast<double>(first + second))));

  double worst_scaling = 0;
  const double base = r.bound * std::sqrt(1000.0);
  for (std::size_t m : {250u, 4000u}) {
    BoundInputs mi = in;
    mi.m = m;
    const double b = evaluate_bound(p, K, mi, std::sqrt(static_cast<double>(m))).bound;
    worst_scaling = std::max(worst_scaling, rel_err(b * std::sqrt(static_cast<double>(m)), base));
  }

  std::vector<std::size_t> lengths;
  for (std::size_t L = 16; L <= 1024; L *= 2) lengths.push_back(L);
  const auto sweep = bound_length_sweep(p, K, in, norm, lengths);
  double lo = sweep.front().bound, hi = lo;
  for (const auto& s : sweep) {
    lo = std::min(lo, s.bound);
    hi = std::max(hi, s.bound);
  }

  bool raised = false;
  try {
    evaluate_bound(p, 1.0, in, norm);
  } catch (const ContractionError&) {
    raised = true;
  }
  const bool ok = ref_err <= 1e-9 && worst_scaling <= 0.10 && hi / lo <= 1.25 && raised;
  return {ok, "bound " + fmt(r.bound) + " (term1 " + fmt(r.term1) + ", term2 " + fmt(r.term2) + "), ref err " +
                  fmt(ref_err) + "; 1/sqrt(m) deviation " + fmt(100 * worst_scaling) + "%; L 16..1024 ratio " +
                  fmt(hi / lo) + "; K=1 " + (raised ? "raises" : "does not raise")};
}

// 7. Analytic gradients agree with finite differences.
Outcome gradient_integrity() {
  double worst = 0;
  std::string where;
  struct Case {
    std::string family;
    S6Variant variant;
  };
  const std::vector<Case> cases{{"s6", S6Variant::original()},
                                {"s6", S6Variant::simplified_poly(3, 3)},
                                {"s6", S6Variant::simplified_nonpoly()},
                                {"s6", S6Variant::bbar_equals_b()},
                                {"linear_attention", S6Variant::original()},
                                {"softmax_attention", S6Variant::original()},
                                {"mamba_block", S6Variant::original()}};
  for (const auto& c : cases) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      LayerCheckSpec spec;
      spec.family = c.family;
      spec.variant = c.variant;
      spec.seed = 700 + seed;
      const double e = layer_grad_check(spec).max_rel_error;
      if (e > worst) {
        worst = e;
        where = c.family + "/" + c.variant.tag();
      }
    }
  }
  // The full training models as well.
  for (const auto& cfg : count_in_row_grid(20)) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Model m = init_model(cfg, 800 + seed);
      const double e = model_grad_check(m, generate_count_in_row(4, 20, seed, false), 4);
      if (e > worst) {
        worst = e;
        where = cfg.id();
      }
    }
  }
  return {worst <= 1e-4, "max rel err " + fmt(worst) + " (" + where + ") over 7 layer configurations and 2 models "
                         "x 5 initializations (tol 1e-4)"};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(POLYSSM_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// 8. Replaying a manifest reproduces every artifact byte for byte.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "polyssm_acceptance_replay";
  fs::remove_all(root);
  const std::vector<std::pair<std::string, std::string>> runs{
      {"data", "data --task count_in_row --L 8 --n 200 --n_test 50 --seed 3"},
      {"data_reg", "data --task regression --L 5 --n 200 --n_test 50 --seed 4"},
      {"train", "train --task count_in_row --L 6 --n_train 256 --n_test 64 --epochs 3 --batch 32 --lr 0.01 --seed 5"},
      {"sweep", "sweep --task regression --L 4 --n_train 128 --n_test 32 --epochs 2 --seeds 2 --seed 6"},
      {"extract", "extract --layer s6 --L 6 --weights random --seed 7"},
      {"extract_att", "extract --layer stacked_attention --layers 2 --L 4 --weights random --seed 8"},
      {"construct", "construct --monomial j=2,P=4,c=1.5 --L 5 --verify 20 --seed 9"},
      {"bound", "bound --weights random --m 200 --sweep 16,64,256 --seed 10"},
      {"gradcheck", "gradcheck --family mamba_block --trials 2 --seed 11"}};
  std::size_t files = 0;
  for (const auto& [name, args] : runs) {
    const fs::path a = root / name / "a", b = root / name / "b";
    if (run_cli(args + " --out " + a.string()) != 0) return {false, name + ": run failed"};
    if (run_cli("replay " + (a / "manifest.json").string() + " --out " + b.string()) != 0) {
      return {false, name + ": replay failed"};
    }
    for (const auto& entry : fs::directory_iterator(a)) {
      const fs::path other = b / entry.path().filename();
      if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
        return {false, name + ": " + entry.path().filename().string() + " differs on replay"};
      }
      ++files;
    }
    if (std::distance(fs::directory_iterator(b), fs::directory_iterator{}) !=
        std::distance(fs::directory_iterator(a), fs::directory_iterator{})) {
      return {false, name + ": replay wrote a different set of files"};
    }
  }
  fs::remove_all(root);
  return {true, std::to_string(runs.size()) + " CLI runs replayed, " + std::to_string(files) +
                    " artifacts byte-identical"};
}

}  // namespace

// Optional arguments select criteria by number; all run by default.
int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence", oracle_equivalence}, {"degree separation", degree_separation},
      {"attention as S6", attention_s6_equivalence},     {"constructive certificates", constructions},
      {"training trends", training_trends},       {"generalization bound", bound_certificate},
      {"gradient integrity", gradient_integrity}, {"determinism", determinism}};
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion '" << argv[a] << "'\n";
      return 2;
    }
    selected[static_cast<std::size_t>(k - 1)] = true;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail << " ("
              << fmt(secs) << " s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
