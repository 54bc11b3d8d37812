// polyssm command-line entry point.
//
// Every subcommand resolves its parameters as defaults < --config JSON <
// explicit flags, writes artifacts into --out, and records the resolved
// configuration in manifest.json. `replay` re-runs a manifest.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "polyssm/construct.hpp"
#include "polyssm/datasets.hpp"
#include "polyssm/genbound.hpp"
#include "polyssm/polyalg.hpp"
#include "polyssm/rng.hpp"
#include "polyssm/trainer.hpp"
#include "polyssm/weights_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polyssm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Param {
  std::string name;
  json def;
  std::string help;
};

class Artifacts {
 public:
  Artifacts(fs::path dir, std::string command, json config)
      : dir_(std::move(dir)), command_(std::move(command)), config_(std::move(config)) {
    hash_ = hex64(fnv1a64(command_ + "\n" + config_.dump()));
    fs::create_directories(dir_);
  }

  const std::string& hash() const { return hash_; }
  std::uint64_t seed() const { return config_.at("seed").get<std::uint64_t>(); }

  void json_file(const std::string& name, json body) {
    body["seed"] = seed();
    body["config_hash"] = hash_;
    text_file(name, body.dump(2) + "\n");
  }
  // CSV artifacts carry the seed and hash in a leading comment line.
  void csv_file(const std::string& name, const std::string& body) {
    text_file(name, "# seed=" + std::to_string(seed()) + " config_hash=" + hash_ + "\n" + body);
  }
  void text_file(const std::string& name, const std::string& body) {
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw InputError("cannot write '" + (dir_ / name).string() + "'");
    os << body;
    files_.push_back(name);
  }
  fs::path path(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }

  void manifest() {
    json m = {{"command", command_}, {"config", config_}, {"config_hash", hash_}, {"seed", seed()},
              {"artifacts", files_}};
    std::ofstream os(dir_ / "manifest.json", std::ios::binary);
    os << m.dump(2) << "\n";
  }

 private:
  fs::path dir_;
  std::string command_;
  json config_;
  std::string hash_;
  std::vector<std::string> files_;
};

json coerce(const std::string& key, const json& def, const json& v) {
  const bool ok = (def.is_boolean() && v.is_boolean()) ||
                  (def.is_number_unsigned() && (v.is_number_unsigned() ||
                                                (v.is_number_integer() && v.get<std::int64_t>() >= 0))) ||
                  (def.is_number_float() && v.is_number()) || (def.is_string() && v.is_string());
  if (!ok) throw UsageError("config key '" + key + "' expects " + std::string(def.type_name()));
  if (def.is_number_float()) return v.get<double>();
  if (def.is_number_unsigned()) return v.get<std::uint64_t>();
  return v;
}

json parse_flag(const std::string& key, const json& def, const std::string& raw) {
  try {
    std::size_t used = 0;
    if (def.is_boolean()) {
      if (raw == "true" || raw == "1") return true;
      if (raw == "false" || raw == "0") return false;
      throw UsageError("--" + key + " expects true or false");
    }
    if (def.is_number_unsigned()) {
      if (!raw.empty() && raw[0] == '-') throw UsageError("--" + key + " expects a non-negative integer");
      const auto v = std::stoull(raw, &used);
      if (used != raw.size()) throw UsageError("--" + key + " expects an integer");
      return v;
    }
    if (def.is_number_float()) {
      const double v = std::stod(raw, &used);
      if (used != raw.size()) throw UsageError("--" + key + " expects a number");
      return v;
    }
  } catch (const std::logic_error&) {
    throw UsageError("--" + key + ": cannot parse '" + raw + "'");
  }
  return raw;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("POLY_SSM_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::logic_error&) {
      throw UsageError("POLY_SSM_SEED is not an unsigned integer");
    }
  }
  return 0;
}

json load_json_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

std::size_t length_or(const json& cfg, std::size_t fallback) {
  const auto L = cfg.at("L").get<std::size_t>();
  return L == 0 ? fallback : L;
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoull(item));
    } catch (const std::logic_error&) {
      throw UsageError("bad list entry '" + item + "'");
    }
  }
  return out;
}

TaskKind parse_task(const std::string& s) {
  if (s == "count_in_row") return TaskKind::CountInRow;
  if (s == "regression") return TaskKind::Regression;
  throw UsageError("unknown task '" + s + "' (count_in_row, regression)");
}

// ---------------------------------------------------------------------------
// data

std::pair<Dataset, Dataset> make_datasets(const json& c, std::uint64_t seed, std::size_t n_train,
                                          std::size_t n_test) {
  const TaskKind task = parse_task(c.at("task").get<std::string>());
  if (task == TaskKind::CountInRow) {
    const std::size_t L = length_or(c, 20);
    const bool balance = c.at("balance").get<bool>();
    return {generate_count_in_row(n_train, L, derive_seed(seed, 0, 0), balance),
            generate_count_in_row(n_test, L, derive_seed(seed, 0, 1), balance)};
  }
  const std::size_t L = length_or(c, 5);
  const auto spec = sample_random_poly_task(L, derive_seed(seed, 0, 2));
  auto s = generate_regression(spec, n_train, n_test, derive_seed(seed, 0, 3), c.at("standardize").get<bool>());
  return {std::move(s.train), std::move(s.test)};
}

void cmd_data(const json& c, Artifacts& out) {
  auto [train, test] = make_datasets(c, out.seed(), c.at("n").get<std::size_t>(), c.at("n_test").get<std::size_t>());
  for (Dataset* d : {&train, &test}) d->meta["config_hash"] = out.hash();
  save_dataset(train, out.path("train.jsonl").string());
  save_dataset(test, out.path("test.jsonl").string());
  std::cout << "wrote " << train.size() << " train / " << test.size() << " test samples, L=" << train.L << "\n";
}

// ---------------------------------------------------------------------------
// train / sweep

ModelConfig model_from(const json& c) {
  ModelConfig m;
  m.family = parse_family(c.at("family").get<std::string>());
  m.n_layers = c.at("layers").get<std::size_t>();
  m.D = c.at("D").get<std::size_t>();
  m.N = c.at("N").get<std::size_t>();
  m.use_pe = c.at("pe").get<bool>();
  m.variant.kind = S6Variant::parse_kind(c.at("variant").get<std::string>());
  return m;
}

TrainConfig train_from(const json& c) {
  TrainConfig t;
  t.lr = c.at("lr").get<double>();
  t.batch = c.at("batch").get<std::size_t>();
  t.epochs = c.at("epochs").get<std::size_t>();
  t.seed = c.at("seed").get<std::uint64_t>();
  t.validate();
  return t;
}

void cmd_train(const json& c, Artifacts& out) {
  Dataset train_set, test_set;
  const std::string data = c.at("data").get<std::string>();
  if (!data.empty()) {
    train_set = load_dataset((fs::path(data) / "train.jsonl").string());
    test_set = load_dataset((fs::path(data) / "test.jsonl").string());
  } else {
    std::tie(train_set, test_set) =
        make_datasets(c, out.seed(), c.at("n_train").get<std::size_t>(), c.at("n_test").get<std::size_t>());
  }
  ModelConfig mc = model_from(c);
  mc.L = train_set.L;
  mc.classes = train_set.kind == TaskKind::CountInRow ? train_set.L + 1 : 0;
  const auto result = train(mc, train_from(c), train_set, test_set);
  std::ostringstream csv;
  write_metrics_csv(std::span<const Metrics>(&result.metrics, 1), csv);
  out.csv_file("metrics.csv", csv.str());
  out.json_file("weights.json", model_to_json(result.model));
  out.json_file("summary.json", metrics_summary_json(result.metrics));
  std::cout << result.metrics.config_id << ": best " << result.metrics.metric_name << " "
            << result.metrics.best_metric << " at epoch " << result.metrics.best_epoch << ", "
            << result.metrics.n_params << " parameters\n";
}

void cmd_sweep(const json& c, Artifacts& out) {
  SweepSpec spec;
  spec.task = parse_task(c.at("task").get<std::string>());
  spec.L = length_or(c, spec.task == TaskKind::CountInRow ? 20 : 5);
  spec.n_train = c.at("n_train").get<std::size_t>();
  spec.n_test = c.at("n_test").get<std::size_t>();
  spec.seeds = c.at("seeds").get<std::size_t>();
  spec.base_seed = out.seed();
  spec.models = spec.task == TaskKind::CountInRow ? count_in_row_grid(spec.L) : regression_grid(spec.L);
  spec.train = train_from(c);
  const auto rows = run_sweep(spec);

  std::ostringstream summary;
  summary << "config_id,family,layers,D,pe,n_params,metric,mean_best";
  for (std::size_t s = 0; s < spec.seeds; ++s) summary << ",seed" << s;
  summary << "\n";
  std::vector<Metrics> all;
  for (const auto& r : rows) {
    const auto& m = r.model;
    summary << m.id() << ',' << family_name(m.family) << ',' << m.n_layers << ',' << m.D << ','
            << (m.use_pe ? 1 : 0) << ',' << r.runs.front().n_params << ',' << r.runs.front().metric_name << ','
            << json(r.mean_best).dump();
    for (const auto& run : r.runs) summary << ',' << json(run.best_metric).dump();
    summary << "\n";
    all.insert(all.end(), r.runs.begin(), r.runs.end());
    std::cout << m.id() << ": mean best " << r.runs.front().metric_name << " " << r.mean_best << "\n";
  }
  out.csv_file("summary.csv", summary.str());
  std::ostringstream metrics;
  write_metrics_csv(all, metrics);
  out.csv_file("metrics.csv", metrics.str());
}

// ---------------------------------------------------------------------------
// extract

void cmd_extract(const json& c, Artifacts& out) {
  const std::string layer = c.at("layer").get<std::string>();
  const std::size_t L = length_or(c, 6);
  const std::string weights = c.at("weights").get<std::string>();
  Rng rng(out.seed());
  auto scalar = [&](double unit) { return Matrix(1, 1, weights == "unit" ? unit : rng.uniform(-1.0, 1.0)); };
  if (weights != "unit" && weights != "random" && !fs::exists(weights)) {
    throw UsageError("--weights expects unit, random or an existing JSON file");
  }
  const bool from_file = weights != "unit" && weights != "random";

  MultiPoly poly;
  json report = {{"layer", layer}, {"L", L}, {"weights", weights}};
  if (layer == "s6") {
    S6Variant v = S6Variant::simplified_poly(3, 3, true);
    S6Weights w;
    if (from_file) {
      w = s6_from_json(load_json_file(weights), &v);
    } else {
      w = {scalar(1.0), scalar(1.0), scalar(1.0), scalar(0.0)};
    }
    poly = extract_s6_channel_poly(w, L, v).back();
    report["expected_degree"] = L + 2;
    report["note"] =
        "degree L+2: h_1 = x_1^2 has degree 2, each recurrence step adds 1 and the C x_L readout adds 1. "
        "A count of L+3 is sometimes quoted for this recurrence; it is not what the unrolled polynomial gives.";
  } else if (layer == "linear_attention") {
    AttentionWeights w = from_file ? attention_from_json(load_json_file(weights))
                                   : AttentionWeights{scalar(1.0), scalar(1.0), scalar(1.0), 1.0};
    poly = extract_attention_poly(w, L);
    report["expected_degree"] = 3;
  } else if (layer == "lti") {
    const std::size_t N = c.at("N").get<std::size_t>();
    Matrix a(N, 1), b(N, 1), cc(N, 1);
    for (std::size_t k = 0; k < N; ++k) {
      a(k, 0) = weights == "unit" ? 0.5 : rng.uniform(-0.9, 0.9);
      b(k, 0) = weights == "unit" ? 1.0 : rng.uniform(-1.0, 1.0);
      cc(k, 0) = weights == "unit" ? 1.0 : rng.uniform(-1.0, 1.0);
    }
    poly = extract_lti_ssm_poly(a, b, cc, L);
    report["expected_degree"] = 1;
  } else if (layer == "stacked_attention") {
    const std::size_t n = c.at("layers").get<std::size_t>();
    std::vector<AttentionWeights> ws;
    for (std::size_t k = 0; k < n; ++k) ws.push_back({scalar(1.0), scalar(1.0), scalar(1.0), 1.0});
    poly = stacked_attention_poly(L, ws);
    std::uint64_t cap = 1;
    for (std::size_t k = 0; k < n; ++k) cap *= 3;
    report["layers"] = n;
    report["degree_cap"] = cap;
  } else {
    throw UsageError("unknown layer '" + layer + "' (s6, linear_attention, lti, stacked_attention)");
  }
  const auto stats = poly_stats(poly);
  report["max_total_degree"] = stats.max_total_degree;
  report["n_monomials"] = stats.n_monomials;
  report["s6_degree"] = L + 2;
  report["attention_layers_needed_for_s6_degree"] = attention_layers_needed(L + 2);
  out.json_file("poly.json", poly_to_json(poly));
  out.json_file("report.json", report);
  std::cout << layer << " L=" << L << ": max_total_degree " << stats.max_total_degree << ", " << stats.n_monomials
            << " monomials\n";
}

// ---------------------------------------------------------------------------
// construct

MonomialSpec parse_monomial(const std::string& s) {
  MonomialSpec m;
  std::stringstream ss(s);
  std::string item;
  bool j = false, p = false;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--monomial expects j=..,P=..,c=..");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    try {
      if (key == "j") {
        m.var = static_cast<std::uint32_t>(std::stoul(val));
        j = true;
      } else if (key == "P") {
        m.power = static_cast<std::uint32_t>(std::stoul(val));
        p = true;
      } else if (key == "c") {
        m.coeff = std::stod(val);
      } else {
        throw UsageError("--monomial: unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw UsageError("--monomial: cannot parse '" + item + "'");
    }
  }
  if (!j || !p) throw UsageError("--monomial needs j and P");
  return m;
}

void cmd_construct(const json& c, Artifacts& out) {
  const std::size_t L = length_or(c, 8);
  const std::string monomial = c.at("monomial").get<std::string>();
  const std::string poly_path = c.at("poly").get<std::string>();
  const bool random_poly = c.at("random_poly").get<bool>();
  if ((monomial.empty() ? 0 : 1) + (poly_path.empty() ? 0 : 1) + (random_poly ? 1 : 0) != 1) {
    throw UsageError("give exactly one of --monomial, --poly, --random_poly true");
  }
  MultiPoly target;
  ConstructedStack stack;
  if (!monomial.empty()) {
    const auto m = parse_monomial(monomial);
    target = MultiPoly(L);
    target.add_term(Monomial::var(m.var, m.power), m.coeff);
    stack = construct_monomial_model(m, L);
  } else {
    if (random_poly) {
      target = sample_random_poly_task(L, derive_seed(out.seed(), 0, 2)).poly();
    } else {
      target = poly_from_json(load_json_file(poly_path));
    }
    stack = construct_polynomial_model(target, L);
  }
  const auto report = verify_construction(stack, target, c.at("verify").get<std::size_t>(), c.at("lo").get<double>(),
                                          c.at("hi").get<double>(), c.at("tol").get<double>(), out.seed());
  out.json_file("stack.json", stack_to_json(stack));
  out.json_file("verify.json", verify_report_to_json(report, target));
  std::cout << (report.pass ? "pass" : "FAIL") << ": max_rel_err " << report.max_rel_err << " over "
            << report.n_trials << " draws (" << stack.blocks.size() << " blocks, width " << stack.width()
            << ", padded length " << stack.padded_length << ")\n";
  if (!report.pass) throw NumericError("construction failed verification");
}

// ---------------------------------------------------------------------------
// bound

void cmd_bound(const json& c, Artifacts& out) {
  BoundInputs in;
  in.gamma = c.at("gamma").get<double>();
  in.delta = c.at("delta").get<double>();
  in.m = c.at("m").get<std::size_t>();
  in.L = length_or(c, 16);
  const std::string weights = c.at("weights").get<std::string>();
  ClassifierWeights w;
  Rng rng(out.seed());
  if (weights == "zero" || weights == "random") {
    const std::size_t D = c.at("D").get<std::size_t>(), N = c.at("N").get<std::size_t>(), C = c.at("C").get<std::size_t>();
    w.s6 = {Matrix(N, D), Matrix(N, D), Matrix(1, D), Matrix(D, N)};
    w.w = Matrix(C, D);
    if (weights == "random") {
      for (Matrix* m : {&w.s6.s_b, &w.s6.s_c, &w.s6.s_delta, &w.w}) {
        for (double& v : m->entries()) v = rng.uniform(-1.0, 1.0);
      }
      for (double& v : w.s6.a.entries()) v = -rng.uniform(0.5, 1.5);
    }
  } else {
    w = classifier_from_json(load_json_file(weights));
  }
  w.validate();
  in.D = w.s6.channels();
  in.N = w.s6.state_size();
  in.C = w.classes();

  // Synthetic sample: x uniform in [-1, 1]^(D x L), labels uniform.
  std::vector<LabeledSequence> data;
  for (std::size_t i = 0; i < in.m; ++i) {
    Rng r = rng.split(i);
    LabeledSequence s{Matrix(in.D, in.L), static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(in.C) - 1))};
    for (double& v : s.x.entries()) v = r.uniform(-1.0, 1.0);
    data.push_back(std::move(s));
  }
  const double k_flag = c.at("K").get<double>();
  const double K = k_flag > 0.0 ? k_flag : contraction_K(w, data);
  const double dn_flag = c.at("data_norm").get<double>();
  const double dn = dn_flag > 0.0 ? dn_flag : data_norm(data);
  BoundReport r = evaluate_bound(norm_profile(w), K, in, dn);
  r.k_empirical = k_flag <= 0.0;
  r.margin_error = empirical_margin_error(w, data, in.gamma);
  out.json_file("bound.json", bound_report_to_json(r));
  std::cout << "bound " << r.bound << " (term1 " << r.term1 << ", term2 " << r.term2 << ", Gamma "
            << r.profile.gamma_w << ", K " << r.K << ")\n";

  const auto lengths = parse_list(c.at("sweep").get<std::string>());
  if (!lengths.empty()) {
    std::ostringstream csv;
    csv << "L,term1,term2,bound\n";
    for (const auto& s : bound_length_sweep(r.profile, K, in, dn, lengths)) {
      csv << s.inputs.L << ',' << json(s.term1).dump() << ',' << json(s.term2).dump() << ',' << json(s.bound).dump()
          << "\n";
    }
    out.csv_file("sweep.csv", csv.str());
  }
}

// ---------------------------------------------------------------------------
// gradcheck

void cmd_gradcheck(const json& c, Artifacts& out) {
  LayerCheckSpec spec;
  spec.family = c.at("family").get<std::string>();
  spec.variant.kind = S6Variant::parse_kind(c.at("variant").get<std::string>());
  spec.D = c.at("D").get<std::size_t>();
  spec.N = c.at("N").get<std::size_t>();
  spec.L = length_or(c, 6);
  spec.epsilon = c.at("eps").get<double>();
  json runs = json::array();
  double worst = 0.0;
  for (std::size_t t = 0; t < c.at("trials").get<std::size_t>(); ++t) {
    spec.seed = derive_seed(out.seed(), t, 5);
    const auto r = layer_grad_check(spec);
    worst = std::max(worst, r.max_rel_error);
    runs.push_back({{"trial", t},
                    {"max_rel_error", r.max_rel_error},
                    {"worst_param", r.worst_param},
                    {"worst_index", r.worst_index},
                    {"analytic", r.analytic},
                    {"numeric", r.numeric}});
  }
  out.json_file("gradcheck.json", {{"family", spec.family}, {"max_rel_error", worst}, {"trials", runs}});
  std::cout << spec.family << ": max relative error " << worst << "\n";
  if (!(worst <= 1e-4)) throw NumericError("gradient check above 1e-4");
}

// ---------------------------------------------------------------------------

struct Command {
  std::string name;
  std::string help;
  std::vector<Param> params;
  std::function<void(const json&, Artifacts&)> run;
};

std::vector<Command> commands() {
  const std::vector<Param> model = {
      {"family", "s6", "s6, linear_attention or softmax_attention"},
      {"layers", 1u, "number of stacked layers"},
      {"D", 2u, "model width"},
      {"N", 1u, "S6 state size"},
      {"pe", false, "learnable positional encoding"},
      {"variant", "original", "S6 variant"},
  };
  const std::vector<Param> optim = {
      {"lr", 1e-3, "Adam learning rate"}, {"batch", 64u, "batch size"}, {"epochs", 200u, "epochs"}};
  const std::vector<Param> task = {
      {"task", "count_in_row", "count_in_row or regression"},
      {"L", 0u, "sequence length (0: task default)"},
      {"balance", true, "balance count-in-row labels"},
      {"standardize", true, "standardize regression targets"},
  };
  auto cat = [](std::initializer_list<std::vector<Param>> parts) {
    std::vector<Param> all;
    for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    return all;
  };
  return {
      {"data", "generate train/test JSONL datasets",
       cat({task, {{"n", 10000u, "training samples"}, {"n_test", 2000u, "test samples"}}}), cmd_data},
      {"train", "train one model",
       cat({model, optim, task,
            {{"n_train", 10000u, "training samples"},
             {"n_test", 2000u, "test samples"},
             {"data", "", "directory with train.jsonl / test.jsonl"}}}),
       cmd_train},
      {"sweep", "train the default model grid over several seeds",
       cat({optim, task,
            {{"n_train", 10000u, "training samples"},
             {"n_test", 2000u, "test samples"},
             {"seeds", 3u, "number of seeds"}}}),
       cmd_sweep},
      {"extract", "unroll a layer into its output polynomial",
       {{"layer", "s6", "s6, linear_attention, lti or stacked_attention"},
        {"L", 0u, "sequence length (0: 6)"},
        {"weights", "unit", "unit, random or a weights JSON file"},
        {"layers", 1u, "stacked attention depth"},
        {"N", 1u, "LTI state size"}},
       cmd_extract},
      {"construct", "compile a monomial or polynomial into Mamba blocks",
       {{"monomial", "", "j=..,P=..,c=.."},
        {"poly", "", "polynomial JSON file"},
        {"random_poly", false, "random product-form target"},
        {"L", 0u, "input length (0: 8)"},
        {"verify", 200u, "verification draws"},
        {"lo", 0.5, "draw range low"},
        {"hi", 1.5, "draw range high"},
        {"tol", 1e-6, "relative tolerance"}},
       cmd_construct},
      {"bound", "evaluate the generalization bound",
       {{"weights", "random", "zero, random or a classifier JSON file"},
        {"D", 2u, "width (zero/random weights)"},
        {"N", 1u, "state size (zero/random weights)"},
        {"C", 2u, "classes (zero/random weights)"},
        {"L", 0u, "sequence length (0: 16)"},
        {"m", 1000u, "sample size"},
        {"gamma", 1.0, "margin"},
        {"delta", 0.1, "confidence"},
        {"K", 0.0, "contraction constant (0: measure)"},
        {"data_norm", 0.0, "data norm (0: measure)"},
        {"sweep", "", "comma-separated lengths"}},
       cmd_bound},
      {"gradcheck", "check layer gradients against finite differences",
       {{"family", "s6", "s6, linear_attention, softmax_attention or mamba_block"},
        {"variant", "original", "S6 variant"},
        {"D", 2u, "width"},
        {"N", 2u, "state size"},
        {"L", 0u, "sequence length (0: 6)"},
        {"eps", 1e-5, "finite-difference step"},
        {"trials", 5u, "random initializations"}},
       cmd_gradcheck},
  };
}

json resolve(const Command& cmd, const std::string& config_path, const CLI::App& sub,
             const std::map<std::string, std::string>& raw) {
  json cfg = json::object();
  for (const auto& p : cmd.params) cfg[p.name] = p.def;
  cfg["seed"] = default_seed();
  if (!config_path.empty()) {
    json j = load_json_file(config_path);
    if (j.is_object() && j.contains("command") && j.contains("config")) {
      if (j["command"] != cmd.name) throw UsageError("manifest is for '" + j["command"].get<std::string>() + "'");
      j = j["config"];
    }
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    for (const auto& [k, v] : j.items()) {
      if (!cfg.contains(k)) throw UsageError("unknown config key '" + k + "'");
      cfg[k] = coerce(k, cfg[k], v);
    }
  }
  for (const auto& [k, v] : raw) {
    if (sub.count("--" + k) > 0) cfg[k] = parse_flag(k, cfg[k], v);
  }
  return cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"polyssm: selective state-space layers as polynomials"};
  app.require_subcommand(1);
  const auto cmds = commands();
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::string> config_path, out_dir;
  for (const auto& cmd : cmds) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path[cmd.name], "JSON config or manifest");
    out_dir[cmd.name] = "out";
    sub->add_option("--out", out_dir[cmd.name], "output directory")->capture_default_str();
    for (const auto& p : cmd.params) sub->add_option("--" + p.name, raw[cmd.name][p.name], p.help);
    sub->add_option("--seed", raw[cmd.name]["seed"], "seed (default: POLY_SSM_SEED or 0)");
  }
  std::string manifest, replay_out = "replay";
  auto* replay = app.add_subcommand("replay", "re-run a manifest");
  replay->add_option("manifest", manifest, "manifest.json")->required();
  replay->add_option("--out", replay_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (replay->parsed()) {
      const json m = load_json_file(manifest);
      if (!m.contains("command") || !m.contains("config")) throw UsageError("not a manifest: " + manifest);
      const std::string name = m["command"].get<std::string>();
      const auto it = std::find_if(cmds.begin(), cmds.end(), [&](const Command& c) { return c.name == name; });
      if (it == cmds.end()) throw UsageError("manifest names unknown command '" + name + "'");
      CLI::App dummy;
      const json cfg = resolve(*it, manifest, dummy, {});
      Artifacts out(replay_out, name, cfg);
      it->run(cfg, out);
      out.manifest();
      return 0;
    }
    for (const auto& cmd : cmds) {
      auto* sub = app.get_subcommand(cmd.name);
      if (!sub->parsed()) continue;
      const json cfg = resolve(cmd, config_path[cmd.name], *sub, raw[cmd.name]);
      Artifacts out(out_dir[cmd.name], cmd.name, cfg);
      try {
        cmd.run(cfg, out);
      } catch (...) {
        out.manifest();
        throw;
      }
      out.manifest();
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const polyssm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
