#pragma once

// Bare sequence models (encoder, optional learnable PE, stacked layers,
// linear head on the last position) and a deterministic Adam trainer.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "polyssm/datasets.hpp"
#include "polyssm/layers.hpp"
#include "polyssm/params.hpp"
#include "polyssm/weights_io.hpp"

namespace polyssm {

enum class ModelFamily { S6, LinearAttention, SoftmaxAttention };

std::string family_name(ModelFamily f);
ModelFamily parse_family(const std::string& name);

struct ModelConfig {
  ModelFamily family = ModelFamily::S6;
  std::size_t n_layers = 1;
  std::size_t D = 2;
  std::size_t N = 1;        // S6 state size
  bool use_pe = false;
  std::size_t classes = 0;  // 0 selects a scalar regression head
  std::size_t L = 20;
  S6Variant variant = S6Variant::original();

  bool regression() const noexcept { return classes == 0; }
  std::size_t outputs() const noexcept { return regression() ? 1 : classes; }
  void validate() const;
  std::string id() const;
};

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch = 64;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  bool check_gradients = true;

  void validate() const;
};

struct Model {
  ModelConfig config;
  std::vector<ParamTensor> params;

  std::size_t n_params() const;
  // Head output for one sequence: logits, or a single prediction.
  std::vector<double> forward(std::span<const double> x) const;
};

Model init_model(const ModelConfig& cfg, std::uint64_t seed);

// Same forward on arbitrary parameter storage (used for gradients).
template <class T>
std::vector<T> model_forward(const ModelConfig& cfg, std::span<const BasicMatrix<T>> params, std::span<const double> x);

ad::Var sample_loss(const ModelConfig& cfg, std::span<const VarMatrix> params, std::span<const double> x, double y);

struct Evaluation {
  double loss = 0.0;
  double metric = 0.0;  // accuracy, or MSE for regression
};

Evaluation evaluate(const Model& m, const Dataset& d);

struct AdamState {
  std::vector<Matrix> m, v;
  std::size_t step = 0;
};

void adam_step(std::span<ParamTensor> params, AdamState& state, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_metric = 0.0;
};

struct Metrics {
  std::string config_id;
  std::uint64_t seed = 0;
  std::string metric_name;  // "accuracy" or "mse"
  std::vector<EpochRecord> epochs;  // epoch 0 is the untrained model
  double final_metric = 0.0;
  double best_metric = 0.0;
  std::size_t best_epoch = 0;
  std::size_t n_params = 0;
  double grad_check_error = 0.0;
  double wall_clock_s = 0.0;  // excluded from serialized artifacts
};

struct TrainResult {
  Model model;
  Metrics metrics;
};

// Runs grad_check at initialization (when enabled) and refuses to train above
// a 1e-4 relative error. Non-finite losses abort with the epoch index.
TrainResult train(const ModelConfig& mc, const TrainConfig& tc, const Dataset& train_set, const Dataset& test_set);

// grad_check of the mean training loss over the first `n_samples` samples, with
// the finite differences taken in long double. Deep attention models have
// gradient entries near 1e-11 at initialization; at a step of 1e-5 their
// central differences are dominated by long-double rounding of the O(1)
// loss, so the default step is 1e-4.
double model_grad_check(const Model& m, const Dataset& d, std::size_t n_samples, double epsilon = 1e-4);

// grad_check of a single layer at a random initialization: weights and input
// uniform in [-0.5, 0.5], loss = sum of outputs weighted by fixed random
// coefficients, finite differences in long double. Families: s6,
// linear_attention, softmax_attention, mamba_block.
struct LayerCheckSpec {
  std::string family = "s6";
  S6Variant variant = S6Variant::original();
  std::size_t D = 2;
  std::size_t N = 2;
  std::size_t L = 6;
  std::uint64_t seed = 0;
  double epsilon = 1e-5;
};

GradCheckResult layer_grad_check(const LayerCheckSpec& spec);

void write_metrics_csv(std::span<const Metrics> runs, std::ostream& os);
nlohmann::json metrics_summary_json(const Metrics& m);

// Several model configurations trained on the same per-seed datasets; the
// score of a configuration is its mean best-epoch test metric over seeds.
struct SweepSpec {
  TaskKind task = TaskKind::CountInRow;
  std::size_t L = 20;
  std::size_t n_train = 10000;
  std::size_t n_test = 2000;
  std::size_t seeds = 3;
  std::uint64_t base_seed = 0;
  bool standardize = true;  // regression targets
  std::vector<ModelConfig> models;
  TrainConfig train;
};

struct SweepRow {
  ModelConfig model;
  std::vector<Metrics> runs;
  double mean_best = 0.0;
};

// Seed s uses datasets and an initialization derived from (base_seed, s) only.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::uint64_t stream);

// Default model grids: 1-layer S6 (D=2) vs 4-layer softmax attention (D=4)
// on count-in-row, and 1-layer S6 with and without PE vs 1-layer softmax
// attention at D in {4, 8} on regression.
std::vector<ModelConfig> count_in_row_grid(std::size_t L);
std::vector<ModelConfig> regression_grid(std::size_t L);

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const Model& m);
Model model_from_json(const nlohmann::json& j);

}  // namespace polyssm
