#pragma once

// Explicit Mamba-block weights that compute a monomial c * x_j^P or a
// polynomial sum_i c_i prod_j x_j^(p_ij) at a fixed readout position.
//
// Every block runs with N = 1, no SiLU, no convolution, a residual path, and
// the simplified polynomial S6 with linear p_A (A_bar = S_delta x + A). Inner
// channel 0 of each block is held at the constant 1 through its bias and
// feeds S_B and S_C, so B_bar = C = 1 everywhere. Outer channels are named
// by a layout allocator and carry the raw input, positional indicators, and
// intermediate results.

#include <cstdint>
#include <optional>
#include <tuple>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "polyssm/layers.hpp"
#include "polyssm/polyalg.hpp"

namespace polyssm {

struct MonomialSpec {
  std::uint32_t var = 1;    // j, 1-based
  std::uint32_t power = 1;  // P
  double coeff = 1.0;       // c
};

struct ConstructedStack {
  std::size_t input_length = 0;   // L
  std::size_t padded_length = 0;  // L' >= L; positions past L read input 0
  Matrix w_in;                    // D x 1
  Matrix b_in;                    // D x 1
  Matrix pe;                      // L' x D
  std::vector<MambaBlockWeights> blocks;
  Matrix w_out;                   // D x 1
  std::size_t readout_position = 0;  // 1-based
  std::vector<std::string> channels;

  std::size_t width() const noexcept { return w_in.rows(); }

  // D x L' activations after the encoder and after every block.
  Matrix encode(std::span<const double> x) const;
  Matrix run(std::span<const double> x) const;
  // w_out^T U at every position, and at the readout position.
  std::vector<double> output_sequence(std::span<const double> x) const;
  double operator()(std::span<const double> x) const;
};

nlohmann::json stack_to_json(const ConstructedStack& s);
ConstructedStack stack_from_json(const nlohmann::json& j);

class StackBuilder;

// Incrementally defines the inner channels of one block.
class BlockBuilder {
 public:
  using Sparse = std::vector<std::pair<std::size_t, double>>;

  struct Inner {
    std::string name;
    Sparse in;            // weights on outer channels
    double in_bias = 0.0;
    Sparse gate;          // weights on outer channels
    double gate_bias = 0.0;
    Sparse delta;         // weights on inner channels of this block
    double a = 0.0;
    Sparse out;           // contributions to outer channels
  };

  BlockBuilder();
  std::size_t add(Inner inner);
  Inner& operator[](std::size_t i) { return inner_[i]; }
  std::size_t size() const noexcept { return inner_.size(); }

  MambaBlockWeights build(std::size_t outer_width) const;

 private:
  std::vector<Inner> inner_;
};

class StackBuilder {
 public:
  StackBuilder(std::size_t input_length, std::size_t padded_length, std::size_t n_blocks);

  std::size_t padded_length() const noexcept { return padded_; }
  std::size_t input_channel() const noexcept { return 0; }

  std::size_t add_channel(const std::string& name);
  // Adds `values` (indexed by 1-based position) to channel `c` through the PE.
  void preload(std::size_t c, const std::vector<double>& values);
  // New channel holding the indicator of first <= t <= last (1-based, inclusive).
  std::size_t add_indicator(const std::string& name, std::size_t first, std::size_t last);
  std::vector<double> indicator(std::size_t first, std::size_t last) const;

  BlockBuilder& block(std::size_t k) { return blocks_.at(k); }

  ConstructedStack finish(std::size_t out_channel, std::size_t readout_position) const;

 private:
  std::size_t input_length_;
  std::size_t padded_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> pe_;  // per channel, per position
  std::vector<BlockBuilder> blocks_;
};

// Block `k` writes x_t * 1[t = j] into a fresh channel, which is returned.
std::size_t build_position_selector(StackBuilder& sb, std::size_t k, std::size_t source, std::uint32_t j,
                                    const std::string& tag);

struct DuplicatedRun {
  std::size_t z;        // value on [j, j+copies-1]
  std::size_t z_shift;  // value on [j+1, j+copies-1]
  std::size_t after;    // indicator of t > j+copies-1
  std::size_t first;    // j
  std::size_t copies;
};

// Block `k` spreads a spike at position j over `copies` positions. Both run
// channels are 0 before the run; after it they hold `fill_after` (0 or 1).
DuplicatedRun build_duplicator(StackBuilder& sb, std::size_t k, std::size_t spike, std::uint32_t j,
                               std::size_t copies, double fill_after, const std::string& tag);

// Block `k` runs the telescoping pair on a run with fill 1 and adds
// coeff * (value^copies) to `out` from position first+copies-1 on, multiplied
// by the indicator channel `gate` when given.
void build_power_block(StackBuilder& sb, std::size_t k, const DuplicatedRun& run, std::size_t out, double coeff,
                       std::optional<std::size_t> gate, const std::string& tag);

// Three blocks computing coeff * x_j^P, read at the last position of a
// zero-padded sequence of length max(L, j+P+2).
ConstructedStack construct_monomial_model(const MonomialSpec& spec, std::size_t L);

// Four blocks computing the target (every term is taken as a product of
// variable powers).
ConstructedStack construct_polynomial_model(const MultiPoly& target, std::size_t L);

// One-block stacks exposing a single stage; the output channel is the stage result.
ConstructedStack selector_stack(std::size_t L, std::uint32_t j);
ConstructedStack duplicator_stack(std::size_t L, std::uint32_t j, std::size_t copies, double fill_after);

struct VerifyReport {
  std::size_t n_trials = 0;
  double lo = 0.0;
  double hi = 0.0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Relative error |model - target| / |target| (0 when both are 0) over
// uniform draws from [lo, hi]^L.
VerifyReport verify_construction(const ConstructedStack& stack, const MultiPoly& target, std::size_t n_trials,
                                 double lo, double hi, double tolerance, std::uint64_t seed);

nlohmann::json verify_report_to_json(const VerifyReport& r, const MultiPoly& target);

}  // namespace polyssm
