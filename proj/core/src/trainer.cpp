#include "polyssm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "polyssm/rng.hpp"

namespace polyssm {

std::string family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::S6: return "s6";
    case ModelFamily::LinearAttention: return "linear_attention";
    case ModelFamily::SoftmaxAttention: return "softmax_attention";
  }
  return "?";
}

ModelFamily parse_family(const std::string& name) {
  if (name == "s6") return ModelFamily::S6;
  if (name == "linear_attention") return ModelFamily::LinearAttention;
  if (name == "softmax_attention") return ModelFamily::SoftmaxAttention;
  throw InputError("unknown model family '" + name + "'");
}

void ModelConfig::validate() const {
  if (n_layers == 0 || D == 0 || L == 0) throw InputError("model config: n_layers, D and L must be positive");
  if (family == ModelFamily::S6 && N == 0) throw InputError("model config: S6 state size must be positive");
  if (classes == 1) throw InputError("model config: a classifier needs at least 2 classes");
  variant.validate();
}

std::string ModelConfig::id() const {
  std::string s = family_name(family) + "_l" + std::to_string(n_layers) + "_d" + std::to_string(D);
  if (family == ModelFamily::S6) s += "_n" + std::to_string(N) + "_" + variant.tag();
  s += use_pe ? "_pe" : "_nope";
  return s;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !(eps > 0.0)) throw InputError("train config: lr and eps must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InputError("train config: betas must lie in [0, 1)");
  }
  if (batch == 0) throw InputError("train config: batch must be positive");
}

// ---------------------------------------------------------------------------
// Parameters

std::size_t Model::n_params() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

Model init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m{cfg, {}};
  Rng rng = Rng(seed).split(0);
  const std::size_t D = cfg.D;
  const double bound = 1.0 / std::sqrt(static_cast<double>(D));
  auto uniform = [&](std::size_t r, std::size_t c, double b) {
    Matrix out(r, c);
    for (double& v : out.entries()) v = rng.uniform(-b, b);
    return out;
  };
  m.params.emplace_back("enc_w", uniform(D, 1, 1.0));
  m.params.emplace_back("enc_b", uniform(D, 1, 1.0));
  if (cfg.use_pe) m.params.emplace_back("pe", uniform(cfg.L, D, 1.0));
  for (std::size_t k = 0; k < cfg.n_layers; ++k) {
    const std::string pre = "layer" + std::to_string(k) + ".";
    if (cfg.family == ModelFamily::S6) {
      m.params.emplace_back(pre + "s_b", uniform(cfg.N, D, bound));
      m.params.emplace_back(pre + "s_c", uniform(cfg.N, D, bound));
      m.params.emplace_back(pre + "s_delta", uniform(1, D, bound));
      m.params.emplace_back(pre + "a", Matrix(D, cfg.N, -1.0));
    } else {
      m.params.emplace_back(pre + "w_q", uniform(D, D, bound));
      m.params.emplace_back(pre + "w_k", uniform(D, D, bound));
      m.params.emplace_back(pre + "w_v", uniform(D, D, bound));
    }
  }
  m.params.emplace_back("head_w", uniform(cfg.outputs(), D, bound));
  m.params.emplace_back("head_b", uniform(cfg.outputs(), 1, bound));
  return m;
}

template <class T>
std::vector<T> model_forward(const ModelConfig& cfg, std::span<const BasicMatrix<T>> params,
                             std::span<const double> x) {
  if (x.size() != cfg.L) {
    throw DimensionError("model expects length " + std::to_string(cfg.L) + ", got " + std::to_string(x.size()));
  }
  const std::size_t per_layer = cfg.family == ModelFamily::S6 ? 4 : 3;
  const std::size_t expected = 4 + (cfg.use_pe ? 1 : 0) + per_layer * cfg.n_layers;
  if (params.size() != expected) {
    throw DimensionError("model expects " + std::to_string(expected) + " parameter tensors, got " +
                         std::to_string(params.size()));
  }
  const std::size_t D = cfg.D;
  const std::size_t L = cfg.L;
  std::size_t p = 0;
  const auto& enc_w = params[p++];
  const auto& enc_b = params[p++];
  const BasicMatrix<T>* pe = cfg.use_pe ? &params[p++] : nullptr;

  BasicMatrix<T> u(D, L);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t d = 0; d < D; ++d) {
      T v = enc_w(d, 0) * x[t] + enc_b(d, 0);
      if (pe) v = v + (*pe)(t, d);
      u(d, t) = v;
    }
  }
  const double softmax_scale = 1.0 / std::sqrt(static_cast<double>(D));
  for (std::size_t k = 0; k < cfg.n_layers; ++k) {
    if (cfg.family == ModelFamily::S6) {
      BasicS6Weights<T> w{params[p], params[p + 1], params[p + 2], params[p + 3]};
      p += 4;
      u = selective_forward(w, cfg.variant, u);
    } else {
      BasicAttentionWeights<T> w{params[p], params[p + 1], params[p + 2], 1.0};
      p += 3;
      if (cfg.family == ModelFamily::LinearAttention) {
        u = causal_linear_attention_forward(w, u);
      } else {
        w.scale = softmax_scale;
        u = softmax_attention_forward<T>(w, u, nullptr);
      }
    }
  }
  const auto& head_w = params[p++];
  const auto& head_b = params[p++];
  std::vector<T> last(D);
  for (std::size_t d = 0; d < D; ++d) last[d] = u(d, L - 1);
  std::vector<T> out(cfg.outputs());
  for (std::size_t c = 0; c < out.size(); ++c) {
    using std::span;
    out[c] = dot(span<const T>(head_w.row(c)), span<const T>(last)) + head_b(c, 0);
  }
  return out;
}

template std::vector<double> model_forward<double>(const ModelConfig&, std::span<const Matrix>,
                                                   std::span<const double>);
template std::vector<ad::Var> model_forward<ad::Var>(const ModelConfig&, std::span<const VarMatrix>,
                                                     std::span<const double>);
template std::vector<long double> model_forward<long double>(const ModelConfig&, std::span<const BasicMatrix<long double>>,
                                                             std::span<const double>);

std::vector<double> Model::forward(std::span<const double> x) const {
  std::vector<Matrix> values;
  values.reserve(params.size());
  for (const auto& p : params) values.push_back(p.value);
  return model_forward<double>(config, values, x);
}

namespace {

std::size_t class_index(double y, std::size_t classes) {
  if (!(y >= 0.0) || y != std::floor(y) || y >= static_cast<double>(classes)) {
    throw InputError("label " + std::to_string(y) + " outside 0.." + std::to_string(classes - 1));
  }
  return static_cast<std::size_t>(y);
}

template <class T>
T loss_of(const ModelConfig& cfg, const std::vector<T>& out, double y) {
  using std::exp;
  using std::log;
  if (cfg.regression()) {
    const T e = out[0] - y;
    return e * e;
  }
  const std::size_t label = class_index(y, cfg.classes);
  auto shift = value_of(out[0]);
  for (const auto& o : out) shift = std::max(shift, value_of(o));
  std::vector<T> ex;
  ex.reserve(out.size());
  for (const auto& o : out) ex.push_back(exp(o - shift));
  T total(0.0);
  for (const auto& e : ex) total = total + e;
  return log(total) + shift - out[label];
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_dataset(const ModelConfig& cfg, const Dataset& d, const char* which) {
  if (d.size() == 0) return;
  if (d.L != cfg.L) {
    throw InputError(std::string(which) + " set has length " + std::to_string(d.L) + ", model expects " +
                     std::to_string(cfg.L));
  }
  if (cfg.regression() != (d.kind == TaskKind::Regression)) {
    throw InputError(std::string(which) + " set does not match the model head");
  }
}

}  // namespace

ad::Var sample_loss(const ModelConfig& cfg, std::span<const VarMatrix> params, std::span<const double> x, double y) {
  return loss_of(cfg, model_forward<ad::Var>(cfg, params, x), y);
}

Evaluation evaluate(const Model& m, const Dataset& d) {
  check_dataset(m.config, d, "evaluation");
  Evaluation e;
  if (d.size() == 0) return e;
  std::vector<Matrix> values;
  for (const auto& p : m.params) values.push_back(p.value);
  double loss = 0.0;
  double metric = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto out = model_forward<double>(m.config, values, d.x[i]);
    loss += loss_of(m.config, out, d.y[i]);
    if (m.config.regression()) {
      metric += (out[0] - d.y[i]) * (out[0] - d.y[i]);
    } else if (argmax(out) == class_index(d.y[i], m.config.classes)) {
      metric += 1.0;
    }
  }
  const double n = static_cast<double>(d.size());
  e.loss = loss / n;
  e.metric = metric / n;
  return e;
}

void adam_step(std::span<ParamTensor> params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.emplace_back(p.value.rows(), p.value.cols(), 0.0);
      state.v.emplace_back(p.value.rows(), p.value.cols(), 0.0);
    }
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].value.entries();
    const auto g = params[k].grad.entries();
    auto m = state.m[k].entries();
    auto v = state.v[k].entries();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      w[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
}

double model_grad_check(const Model& m, const Dataset& d, std::size_t n_samples, double epsilon) {
  check_dataset(m.config, d, "grad-check");
  const std::size_t n = std::min(n_samples, d.size());
  if (n == 0) throw InputError("grad_check needs at least one sample");
  LossFn fn = [&](std::span<const VarMatrix> p) {
    ad::Var total(0.0);
    for (std::size_t i = 0; i < n; ++i) total = total + sample_loss(m.config, p, d.x[i], d.y[i]);
    return total / static_cast<double>(n);
  };
  ExtendedLossFn reference = [&](std::span<const BasicMatrix<long double>> p) {
    long double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      total += loss_of(m.config, model_forward<long double>(m.config, p, d.x[i]), d.y[i]);
    }
    return total / static_cast<long double>(n);
  };
  return grad_check(fn, reference, m.params, epsilon).max_rel_error;
}

TrainResult train(const ModelConfig& mc, const TrainConfig& tc, const Dataset& train_set, const Dataset& test_set) {
  const auto start = std::chrono::steady_clock::now();
  mc.validate();
  tc.validate();
  check_dataset(mc, train_set, "training");
  check_dataset(mc, test_set, "test");
  if (train_set.size() == 0) throw InputError("training set is empty");

  TrainResult r{init_model(mc, tc.seed), {}};
  Metrics& met = r.metrics;
  met.config_id = mc.id();
  met.seed = tc.seed;
  met.metric_name = mc.regression() ? "mse" : "accuracy";
  met.n_params = r.model.n_params();
  if (tc.check_gradients) {
    met.grad_check_error = model_grad_check(r.model, train_set, 4);
    if (!(met.grad_check_error <= 1e-4)) {
      throw NumericError("grad_check failed at initialization for " + met.config_id + ": relative error " +
                         std::to_string(met.grad_check_error));
    }
  }

  const bool lower_better = mc.regression();
  auto record = [&](std::size_t epoch, double train_loss) {
    const Evaluation te = evaluate(r.model, test_set);
    met.epochs.push_back({epoch, train_loss, te.loss, te.metric});
    const bool better = lower_better ? te.metric < met.best_metric : te.metric > met.best_metric;
    if (epoch == 0 || better) {
      met.best_metric = te.metric;
      met.best_epoch = epoch;
    }
    met.final_metric = te.metric;
  };
  record(0, evaluate(r.model, train_set).loss);

  AdamState state;
  const Rng shuffle_root = Rng(tc.seed).split(1);
  std::vector<std::size_t> order(train_set.size());
  std::vector<double> adjoint;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = shuffle_root.split(epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    }
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += tc.batch) {
      const std::size_t b1 = std::min(order.size(), b0 + tc.batch);
      ad::TapeScope scope;
      const auto leaves = as_leaves(r.model.params);
      std::vector<ad::Var> losses;
      losses.reserve(b1 - b0);
      try {
        for (std::size_t i = b0; i < b1; ++i) {
          losses.push_back(sample_loss(mc, leaves, train_set.x[order[i]], train_set.y[order[i]]));
        }
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      const ad::Var batch_loss = ad::sum(losses) / static_cast<double>(b1 - b0);
      if (!std::isfinite(batch_loss.value())) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
      }
      epoch_loss += batch_loss.value() * static_cast<double>(b1 - b0);
      for (auto& p : r.model.params) std::fill(p.grad.entries().begin(), p.grad.entries().end(), 0.0);
      accumulate_grads(batch_loss, leaves, r.model.params);
      adam_step(r.model.params, state, tc);
    }
    record(epoch, epoch_loss / static_cast<double>(order.size()));
  }
  met.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

namespace {

template <class T>
BasicMatrix<T> layer_forward(const LayerCheckSpec& spec, std::span<const BasicMatrix<T>> p, const BasicMatrix<T>& u) {
  const std::string& f = spec.family;
  if (f == "s6") return selective_forward(BasicS6Weights<T>{p[0], p[1], p[2], p[3]}, spec.variant, u);
  if (f == "linear_attention") return causal_linear_attention_forward(BasicAttentionWeights<T>{p[0], p[1], p[2], 1.0}, u);
  if (f == "softmax_attention") {
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec.D));
    return softmax_attention_forward(BasicAttentionWeights<T>{p[0], p[1], p[2], scale}, u, &p[3]);
  }
  BasicMambaBlockWeights<T> w{p[0], p[1], p[2], p[3], p[4], p[5], p[6], BasicS6Weights<T>{p[7], p[8], p[9], p[10]},
                              spec.variant, MambaFlags{true, true, true}};
  return mamba_block_forward(w, u);
}

}  // namespace

GradCheckResult layer_grad_check(const LayerCheckSpec& spec) {
  const std::size_t D = spec.D, N = spec.N, L = spec.L;
  if (D == 0 || N == 0 || L == 0) throw InputError("layer grad_check: D, N and L must be positive");
  Rng rng(spec.seed);
  auto uniform = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.entries()) v = rng.uniform(-0.5, 0.5);
    return m;
  };
  const Matrix x = uniform(D, L);
  const Matrix coeff = uniform(D, L);
  std::vector<ParamTensor> params;
  const std::string& f = spec.family;
  if (f == "s6") {
    params = {{"s_b", uniform(N, D)}, {"s_c", uniform(N, D)}, {"s_delta", uniform(1, D)}, {"a", uniform(D, N)}};
  } else if (f == "linear_attention" || f == "softmax_attention") {
    params = {{"w_q", uniform(D, D)}, {"w_k", uniform(D, D)}, {"w_v", uniform(D, D)}};
    if (f == "softmax_attention") params.emplace_back("pe", uniform(L, D));
  } else if (f == "mamba_block") {
    const std::size_t E = D;
    params = {{"in_w", uniform(E, D)},    {"in_b", uniform(E, 1)},   {"conv", uniform(E, 2)},
              {"gate_w", uniform(E, D)},  {"gate_b", uniform(E, 1)}, {"out_w", uniform(D, E)},
              {"out_b", uniform(D, 1)},   {"s_b", uniform(N, E)},    {"s_c", uniform(N, E)},
              {"s_delta", uniform(1, E)}, {"a", uniform(E, N)}};
  } else {
    throw InputError("layer grad_check: unknown family '" + f + "'");
  }
  LossFn loss = [&](std::span<const VarMatrix> p) {
    const VarMatrix y = layer_forward<ad::Var>(spec, p, as_constant(x));
    const VarMatrix c = as_constant(coeff);
    return ad::dot(y.entries(), c.entries());
  };
  BasicMatrix<long double> x_ext(D, L), c_ext(D, L);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x_ext.entries()[i] = x.entries()[i];
    c_ext.entries()[i] = coeff.entries()[i];
  }
  ExtendedLossFn reference = [&](std::span<const BasicMatrix<long double>> p) {
    const auto y = layer_forward<long double>(spec, p, x_ext);
    return dot(std::span<const long double>(y.entries()), std::span<const long double>(c_ext.entries()));
  };
  return grad_check(loss, reference, params, spec.epsilon);
}

// ---------------------------------------------------------------------------
// Sweeps

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::uint64_t stream) {
  return Rng(base).split(index).split(stream).next_u64();
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  if (spec.seeds == 0) throw InputError("sweep needs at least one seed");
  std::vector<SweepRow> rows;
  for (const auto& m : spec.models) {
    ModelConfig mc = m;
    mc.L = spec.L;
    if (spec.task == TaskKind::CountInRow) {
      mc.classes = spec.L + 1;
    } else {
      mc.classes = 0;
    }
    mc.validate();
    rows.push_back({mc, {}, 0.0});
  }
  for (std::size_t s = 0; s < spec.seeds; ++s) {
    Dataset train_set, test_set;
    if (spec.task == TaskKind::CountInRow) {
      train_set = generate_count_in_row(spec.n_train, spec.L, derive_seed(spec.base_seed, s, 0), true);
      test_set = generate_count_in_row(spec.n_test, spec.L, derive_seed(spec.base_seed, s, 1), true);
    } else {
      const auto task = sample_random_poly_task(spec.L, derive_seed(spec.base_seed, s, 2));
      auto splits = generate_regression(task, spec.n_train, spec.n_test, derive_seed(spec.base_seed, s, 3),
                                        spec.standardize);
      train_set = std::move(splits.train);
      test_set = std::move(splits.test);
    }
    TrainConfig tc = spec.train;
    tc.seed = derive_seed(spec.base_seed, s, 4);
    for (auto& row : rows) row.runs.push_back(train(row.model, tc, train_set, test_set).metrics);
  }
  for (auto& row : rows) {
    double total = 0.0;
    for (const auto& r : row.runs) total += r.best_metric;
    row.mean_best = total / static_cast<double>(row.runs.size());
  }
  return rows;
}

std::vector<ModelConfig> count_in_row_grid(std::size_t L) {
  ModelConfig s6;
  s6.family = ModelFamily::S6;
  s6.D = 2;
  s6.L = L;
  s6.classes = L + 1;
  ModelConfig att;
  att.family = ModelFamily::SoftmaxAttention;
  att.n_layers = 4;
  att.D = 4;
  att.use_pe = true;
  att.L = L;
  att.classes = L + 1;
  return {s6, att};
}

std::vector<ModelConfig> regression_grid(std::size_t L) {
  std::vector<ModelConfig> grid;
  for (std::size_t D : {4, 8}) {
    for (int kind = 0; kind < 3; ++kind) {
      ModelConfig c;
      c.family = kind < 2 ? ModelFamily::S6 : ModelFamily::SoftmaxAttention;
      c.use_pe = kind != 0;
      c.D = D;
      c.L = L;
      grid.push_back(c);
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Serialization

void write_metrics_csv(std::span<const Metrics> runs, std::ostream& os) {
  os << "config_id,seed,epoch,train_loss,test_loss,test_metric\n";
  for (const auto& m : runs) {
    for (const auto& e : m.epochs) {
      os << m.config_id << ',' << m.seed << ',' << e.epoch << ',' << nlohmann::json(e.train_loss).dump() << ','
         << nlohmann::json(e.test_loss).dump() << ',' << nlohmann::json(e.test_metric).dump() << '\n';
    }
  }
}

nlohmann::json metrics_summary_json(const Metrics& m) {
  return {{"config_id", m.config_id},     {"seed", m.seed},
          {"metric", m.metric_name},      {"final_metric", m.final_metric},
          {"best_metric", m.best_metric}, {"best_epoch", m.best_epoch},
          {"n_params", m.n_params},       {"grad_check_error", m.grad_check_error},
          {"epochs", m.epochs.empty() ? 0 : m.epochs.back().epoch}};
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"family", family_name(c.family)}, {"n_layers", c.n_layers}, {"D", c.D},     {"N", c.N},
          {"use_pe", c.use_pe},              {"classes", c.classes},   {"L", c.L},
          {"variant", variant_to_json(c.variant)}};
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw ParseError(std::string(what) + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) == keys.end()) {
      throw ParseError(std::string(what) + ": unknown key '" + k + "'");
    }
  }
}

}  // namespace

ModelConfig model_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"family", "n_layers", "D", "N", "use_pe", "classes", "L", "variant"}, "model config");
  ModelConfig c;
  try {
    if (j.contains("family")) c.family = parse_family(j["family"].get<std::string>());
    c.n_layers = j.value("n_layers", c.n_layers);
    c.D = j.value("D", c.D);
    c.N = j.value("N", c.N);
    c.use_pe = j.value("use_pe", c.use_pe);
    c.classes = j.value("classes", c.classes);
    c.L = j.value("L", c.L);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  if (j.contains("variant")) c.variant = variant_from_json(j["variant"]);
  c.validate();
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},         {"beta1", c.beta1},   {"beta2", c.beta2}, {"eps", c.eps},
          {"batch", c.batch},   {"epochs", c.epochs}, {"seed", c.seed},   {"check_gradients", c.check_gradients}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"lr", "beta1", "beta2", "eps", "batch", "epochs", "seed", "check_gradients"}, "train config");
  TrainConfig c;
  try {
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.batch = j.value("batch", c.batch);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.check_gradients = j.value("check_gradients", c.check_gradients);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json model_to_json(const Model& m) {
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& p : m.params) tensors[p.name] = matrix_to_json(p.value);
  nlohmann::json order = nlohmann::json::array();
  for (const auto& p : m.params) order.push_back(p.name);
  return {{"layer_type", "sequence_model"},
          {"config", model_config_to_json(m.config)},
          {"order", order},
          {"tensors", tensors},
          {"n_params", m.n_params()}};
}

Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("layer_type").get<std::string>() != "sequence_model") throw ParseError("not a sequence_model");
    Model reference = init_model(model_config_from_json(j.at("config")), 0);
    for (auto& p : reference.params) {
      Matrix v = matrix_from_json(j.at("tensors").at(p.name));
      if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
        throw ParseError("tensor '" + p.name + "' has shape " + v.shape_string() + ", expected " +
                         p.value.shape_string());
      }
      p = ParamTensor(p.name, std::move(v));
    }
    return reference;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sequence model: ") + e.what());
  }
}

}  // namespace polyssm
