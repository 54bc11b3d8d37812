#include <benchmark/benchmark.h>

#include "polyssm/construct.hpp"
#include "polyssm/datasets.hpp"
#include "polyssm/polyalg.hpp"
#include "polyssm/rng.hpp"
#include "polyssm/trainer.hpp"

using namespace polyssm;

namespace {

Matrix uniform_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1, double hi = 1) {
  Matrix m(r, c);
  for (double& v : m.entries()) v = rng.uniform(lo, hi);
  return m;
}

S6Weights random_s6(Rng& rng, std::size_t D, std::size_t N) {
  return {uniform_matrix(rng, N, D), uniform_matrix(rng, N, D), uniform_matrix(rng, 1, D),
          uniform_matrix(rng, D, N, -2, -0.5)};
}

void BM_SelectiveForward(benchmark::State& state) {
  Rng rng(1);
  const auto D = static_cast<std::size_t>(state.range(0));
  const auto L = static_cast<std::size_t>(state.range(1));
  const S6Weights w = random_s6(rng, D, 4);
  const Matrix x = uniform_matrix(rng, D, L);
  for (auto _ : state) benchmark::DoNotOptimize(selective_forward(w, S6Variant::original(), x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(L));
}
BENCHMARK(BM_SelectiveForward)->Args({4, 64})->Args({8, 256})->Args({16, 1024});

void BM_LinearAttention(benchmark::State& state) {
  Rng rng(2);
  const auto D = static_cast<std::size_t>(state.range(0));
  const auto L = static_cast<std::size_t>(state.range(1));
  const AttentionWeights w{uniform_matrix(rng, D, D), uniform_matrix(rng, D, D), uniform_matrix(rng, D, D), 1.0};
  const Matrix x = uniform_matrix(rng, D, L);
  for (auto _ : state) benchmark::DoNotOptimize(causal_linear_attention_forward(w, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(L));
}
BENCHMARK(BM_LinearAttention)->Args({4, 64})->Args({8, 256});

void BM_SoftmaxAttention(benchmark::State& state) {
  Rng rng(3);
  const auto D = static_cast<std::size_t>(state.range(0));
  const auto L = static_cast<std::size_t>(state.range(1));
  const AttentionWeights w{uniform_matrix(rng, D, D), uniform_matrix(rng, D, D), uniform_matrix(rng, D, D),
                           1.0 / std::sqrt(static_cast<double>(D))};
  const Matrix x = uniform_matrix(rng, D, L);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_attention_forward(w, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(L));
}
BENCHMARK(BM_SoftmaxAttention)->Args({4, 64})->Args({8, 256});

void BM_PolyMultiply(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  MultiPoly s(n);
  for (std::uint32_t v = 1; v <= n; ++v) s = s + MultiPoly::variable(n, v);
  const MultiPoly sq = s * s;
  for (auto _ : state) benchmark::DoNotOptimize(sq * s);
}
BENCHMARK(BM_PolyMultiply)->Arg(4)->Arg(8)->Arg(16);

void BM_ExtractS6(benchmark::State& state) {
  Rng rng(4);
  const S6Weights w = random_s6(rng, 1, 1);
  const auto L = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(extract_s6_channel_poly(w, L));
}
BENCHMARK(BM_ExtractS6)->Arg(4)->Arg(6)->Arg(8);

void BM_StackedAttentionPoly(benchmark::State& state) {
  Rng rng(5);
  std::vector<AttentionWeights> layers;
  for (int k = 0; k < state.range(0); ++k) {
    layers.push_back({uniform_matrix(rng, 1, 1), uniform_matrix(rng, 1, 1), uniform_matrix(rng, 1, 1), 1.0});
  }
  for (auto _ : state) benchmark::DoNotOptimize(stacked_attention_poly(4, layers));
}
BENCHMARK(BM_StackedAttentionPoly)->Arg(1)->Arg(2)->Arg(3);

void BM_ConstructedMonomial(benchmark::State& state) {
  const ConstructedStack s = construct_monomial_model({2, 6, 1.5}, 8);
  const std::vector<double> x{0.9, 1.1, 0.8, 1.2, 1.0, 0.7, 1.3, 0.6};
  for (auto _ : state) benchmark::DoNotOptimize(s(x));
}
BENCHMARK(BM_ConstructedMonomial);

void BM_TapeForwardBackward(benchmark::State& state) {
  ModelConfig c;
  c.family = ModelFamily::S6;
  c.D = static_cast<std::size_t>(state.range(0));
  c.classes = 21;
  c.L = 20;
  const Model m = init_model(c, 0);
  const Dataset d = generate_count_in_row(1, 20, 0, false);
  std::vector<ParamTensor> params = m.params;
  for (auto _ : state) {
    ad::TapeScope scope;
    const std::vector<VarMatrix> leaves = as_leaves(params);
    const ad::Var loss = sample_loss(c, leaves, d.x[0], d.y[0]);
    accumulate_grads(loss, leaves, params);
  }
}
BENCHMARK(BM_TapeForwardBackward)->Arg(2)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
