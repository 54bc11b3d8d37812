#include "polyssm/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "polyssm/rng.hpp"

namespace polyssm {

std::vector<int> count_in_row_labels(std::span<const double> x) {
  std::vector<int> y(x.size());
  int run = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 1.0) {
      ++run;
    } else if (x[i] == 0.0) {
      run = 0;
    } else {
      throw InputError("count-in-row: entry " + std::to_string(i) + " is not binary");
    }
    y[i] = run;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Polynomial tasks

void PolyTaskSpec::validate() const {
  if (L == 0) throw InputError("poly task: L must be positive");
  if (coeffs.size() != exponents.size()) {
    throw InputError("poly task: " + std::to_string(coeffs.size()) + " coefficients for " +
                     std::to_string(exponents.size()) + " exponent rows");
  }
  for (const auto& row : exponents) {
    if (row.size() != L) throw InputError("poly task: exponent row of length " + std::to_string(row.size()));
  }
}

MultiPoly PolyTaskSpec::poly() const {
  validate();
  MultiPoly p(L);
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    std::vector<Monomial::Exponent> exps;
    for (std::size_t j = 0; j < L; ++j) exps.emplace_back(static_cast<std::uint32_t>(j + 1), exponents[i][j]);
    p.add_term(Monomial(std::move(exps)), coeffs[i]);
  }
  return p;
}

PolyTaskSpec sample_random_poly_task(std::size_t L, std::uint64_t seed, std::size_t n_terms) {
  if (L == 0) throw InputError("poly task: L must be positive");
  PolyTaskSpec t;
  t.L = L;
  t.seed = seed;
  Rng rng(seed);
  for (std::size_t i = 0; i < n_terms; ++i) {
    t.coeffs.push_back(rng.uniform(-2.0, 2.0));
    std::vector<std::uint32_t> row;
    for (std::size_t j = 0; j < L; ++j) row.push_back(static_cast<std::uint32_t>(rng.uniform_int(1, static_cast<std::int64_t>(L))));
    t.exponents.push_back(std::move(row));
  }
  return t;
}

namespace {

nlohmann::json task_to_json(const PolyTaskSpec& t) {
  return {{"L", t.L}, {"coeffs", t.coeffs}, {"exponents", t.exponents}, {"seed", t.seed}};
}

PolyTaskSpec task_from_json(const nlohmann::json& j) {
  PolyTaskSpec t;
  t.L = j.at("L").get<std::size_t>();
  t.coeffs = j.at("coeffs").get<std::vector<double>>();
  t.exponents = j.at("exponents").get<std::vector<std::vector<std::uint32_t>>>();
  t.seed = j.value("seed", std::uint64_t{0});
  t.validate();
  return t;
}

const char* kind_name(TaskKind k) { return k == TaskKind::CountInRow ? "count_in_row" : "regression"; }

}  // namespace

bool Dataset::operator==(const Dataset& o) const {
  auto same_task = [](const std::optional<PolyTaskSpec>& a, const std::optional<PolyTaskSpec>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->L == b->L && a->coeffs == b->coeffs && a->exponents == b->exponents && a->seed == b->seed;
  };
  auto same_stats = [](const std::optional<Standardization>& a, const std::optional<Standardization>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || (a->mean == b->mean && a->std == b->std);
  };
  return kind == o.kind && L == o.L && seed == o.seed && x == o.x && y == o.y && y_raw == o.y_raw &&
         same_task(task, o.task) && same_stats(standardization, o.standardization) && meta == o.meta;
}

// ---------------------------------------------------------------------------
// Generators

Dataset generate_count_in_row(std::size_t n, std::size_t L, std::uint64_t seed, bool balance) {
  if (L == 0) throw InputError("count-in-row: L must be positive");
  if (balance && n < L + 1) {
    throw InputError("count-in-row: balancing " + std::to_string(L + 1) + " labels needs n >= " +
                     std::to_string(L + 1) + ", got " + std::to_string(n));
  }
  Dataset d;
  d.kind = TaskKind::CountInRow;
  d.L = L;
  d.seed = seed;
  d.meta = {{"n", n}, {"balance", balance}};
  const Rng base(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = base.split(i);
    std::vector<double> x(L);
    if (balance) {
      const std::size_t label = i % (L + 1);
      // Uniform sequence conditioned on the final run length: the last
      // `label` entries are 1, the one before them is 0, the rest are free.
      const std::size_t free = label < L ? L - label - 1 : 0;
      for (std::size_t t = 0; t < free; ++t) x[t] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      if (label < L) x[L - label - 1] = 0.0;
      for (std::size_t t = L - label; t < L; ++t) x[t] = 1.0;
    } else {
      for (double& v : x) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    d.y.push_back(count_in_row_labels(x).back());
    d.x.push_back(std::move(x));
  }
  return d;
}

RegressionSplits generate_regression(const MultiPoly& target, std::size_t n_train, std::size_t n_test,
                                     std::uint64_t seed, bool standardize, const std::optional<PolyTaskSpec>& task) {
  const std::size_t L = target.n_vars();
  if (L == 0) throw InputError("regression: target has no variables");
  RegressionSplits s;
  const Rng base(seed);
  auto fill = [&](Dataset& d, std::size_t n, std::uint64_t stream, const char* split) {
    d.kind = TaskKind::Regression;
    d.L = L;
    d.seed = seed;
    d.task = task;
    d.meta = {{"split", split}, {"n", n}, {"box", {0.1, 2.0}}};
    const Rng split_rng = base.split(stream);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = split_rng.split(i);
      std::vector<double> x(L);
      for (double& v : x) v = rng.uniform(0.1, 2.0);
      const double y = target.eval(x);
      d.y_raw.push_back(y);
      d.y.push_back(y);
      d.x.push_back(std::move(x));
    }
  };
  fill(s.train, n_train, 0, "train");
  fill(s.test, n_test, 1, "test");
  if (standardize) {
    if (n_train == 0) throw InputError("regression: standardization needs training samples");
    double mean = 0.0;
    for (double v : s.train.y_raw) mean += v;
    mean /= static_cast<double>(n_train);
    double var = 0.0;
    for (double v : s.train.y_raw) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n_train);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      throw InputError("regression: degenerate task, training targets have zero variance");
    }
    for (Dataset* d : {&s.train, &s.test}) {
      d->standardization = Standardization{mean, sd};
      for (std::size_t i = 0; i < d->size(); ++i) d->y[i] = (d->y_raw[i] - mean) / sd;
    }
  }
  return s;
}

RegressionSplits generate_regression(const PolyTaskSpec& task, std::size_t n_train, std::size_t n_test,
                                     std::uint64_t seed, bool standardize) {
  return generate_regression(task.poly(), n_train, n_test, seed, standardize, task);
}

// ---------------------------------------------------------------------------
// JSONL

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_jsonl(const Dataset& d, std::ostream& os) {
  nlohmann::json header = {{"kind", kind_name(d.kind)}, {"L", d.L}, {"seed", d.seed}, {"meta", d.meta}};
  header["task"] = d.task ? task_to_json(*d.task) : nlohmann::json(nullptr);
  header["standardization"] = d.standardization
                                  ? nlohmann::json{{"mean", d.standardization->mean}, {"std", d.standardization->std}}
                                  : nlohmann::json(nullptr);
  header["config_hash"] = hex64(fnv1a64(header.dump()));
  os << nlohmann::json{{"header", header}}.dump() << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    nlohmann::json line;
    if (d.kind == TaskKind::CountInRow) {
      std::vector<int> bits(d.x[i].begin(), d.x[i].end());
      line["x"] = bits;
      line["y"] = static_cast<int>(d.y[i]);
    } else {
      line["x"] = d.x[i];
      line["y"] = d.y[i];
      line["y_raw"] = d.y_raw[i];
    }
    os << line.dump() << '\n';
  }
}

Dataset read_jsonl(std::istream& is) {
  Dataset d;
  std::string text;
  long line_no = 0;
  bool have_header = false;
  while (std::getline(is, text)) {
    ++line_no;
    if (text.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    try {
      if (!have_header && j.contains("header")) {
        const auto& h = j["header"];
        const std::string kind = h.at("kind").get<std::string>();
        if (kind == "count_in_row") {
          d.kind = TaskKind::CountInRow;
        } else if (kind == "regression") {
          d.kind = TaskKind::Regression;
        } else {
          throw ParseError("unknown dataset kind '" + kind + "'", line_no);
        }
        d.L = h.at("L").get<std::size_t>();
        d.seed = h.value("seed", std::uint64_t{0});
        d.meta = h.value("meta", nlohmann::json::object());
        if (h.contains("task") && !h["task"].is_null()) d.task = task_from_json(h["task"]);
        if (h.contains("standardization") && !h["standardization"].is_null()) {
          d.standardization = Standardization{h["standardization"].at("mean").get<double>(),
                                              h["standardization"].at("std").get<double>()};
        }
        have_header = true;
        continue;
      }
      std::vector<double> x = j.at("x").get<std::vector<double>>();
      if (have_header && x.size() != d.L) {
        throw ParseError("sample of length " + std::to_string(x.size()) + ", header says " + std::to_string(d.L),
                         line_no);
      }
      if (!have_header && d.x.empty()) d.L = x.size();
      d.y.push_back(j.at("y").get<double>());
      if (j.contains("y_raw")) {
        d.y_raw.push_back(j["y_raw"].get<double>());
        d.kind = TaskKind::Regression;
      }
      d.x.push_back(std::move(x));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write dataset to '" + path + "'");
  write_jsonl(d, os);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read dataset from '" + path + "'");
  return read_jsonl(is);
}

}  // namespace polyssm
