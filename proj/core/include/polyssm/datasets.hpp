#pragma once

// Synthetic sequence tasks: count-in-row classification and random
// product-form polynomial regression, with a JSONL encoding.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "polyssm/polyalg.hpp"

namespace polyssm {

// Length of the run of ones ending at each position. Entries must be 0 or 1.
std::vector<int> count_in_row_labels(std::span<const double> x);

struct PolyTaskSpec {
  std::size_t L = 5;
  std::vector<double> coeffs;                            // c_i in [-2, 2]
  std::vector<std::vector<std::uint32_t>> exponents;     // p_ij in {1..L}, one row per term
  std::uint64_t seed = 0;

  MultiPoly poly() const;
  void validate() const;
};

PolyTaskSpec sample_random_poly_task(std::size_t L, std::uint64_t seed, std::size_t n_terms = 3);

struct Standardization {
  double mean = 0.0;
  double std = 1.0;
};

enum class TaskKind { CountInRow, Regression };

struct Dataset {
  TaskKind kind = TaskKind::CountInRow;
  std::size_t L = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> x;
  std::vector<double> y;      // label (count-in-row) or possibly standardized target
  std::vector<double> y_raw;  // regression only
  std::optional<PolyTaskSpec> task;
  std::optional<Standardization> standardization;
  nlohmann::json meta = nlohmann::json::object();  // generation settings

  std::size_t size() const noexcept { return x.size(); }
  bool operator==(const Dataset& o) const;
};

// When `balance` is set, label l is given to samples with index = l mod (L+1)
// and the sequence is drawn from the uniform distribution conditioned on that
// label; counts are then within one of uniform.
Dataset generate_count_in_row(std::size_t n, std::size_t L, std::uint64_t seed, bool balance);

struct RegressionSplits {
  Dataset train;
  Dataset test;
};

// x ~ U[0.1, 2]^L; y_raw = target(x). With `standardize`, y = (y_raw - mu) / sigma
// using the population statistics of the training split.
RegressionSplits generate_regression(const MultiPoly& target, std::size_t n_train, std::size_t n_test,
                                     std::uint64_t seed, bool standardize,
                                     const std::optional<PolyTaskSpec>& task = std::nullopt);
RegressionSplits generate_regression(const PolyTaskSpec& task, std::size_t n_train, std::size_t n_test,
                                     std::uint64_t seed, bool standardize);

// JSONL: a header line {"header": {...}} followed by one sample per line.
void write_jsonl(const Dataset& d, std::ostream& os);
Dataset read_jsonl(std::istream& is);
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

std::uint64_t fnv1a64(std::string_view s) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace polyssm
