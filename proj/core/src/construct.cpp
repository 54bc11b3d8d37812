#include "polyssm/construct.hpp"

#include <algorithm>
#include <cmath>

#include "polyssm/rng.hpp"
#include "polyssm/weights_io.hpp"

namespace polyssm {

// ---------------------------------------------------------------------------
// ConstructedStack

Matrix ConstructedStack::encode(std::span<const double> x) const {
  if (x.size() != input_length) {
    throw DimensionError("constructed stack: input of length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(input_length));
  }
  const std::size_t D = width();
  Matrix u(D, padded_length);
  for (std::size_t t = 0; t < padded_length; ++t) {
    const double xt = t < x.size() ? x[t] : 0.0;
    for (std::size_t d = 0; d < D; ++d) u(d, t) = w_in(d, 0) * xt + b_in(d, 0) + pe(t, d);
  }
  return u;
}

Matrix ConstructedStack::run(std::span<const double> x) const {
  Matrix u = encode(x);
  for (const auto& b : blocks) u = mamba_block_forward(b, u);
  return u;
}

std::vector<double> ConstructedStack::output_sequence(std::span<const double> x) const {
  const Matrix u = run(x);
  std::vector<double> y(padded_length, 0.0);
  for (std::size_t t = 0; t < padded_length; ++t)
    for (std::size_t d = 0; d < width(); ++d) y[t] += w_out(d, 0) * u(d, t);
  return y;
}

double ConstructedStack::operator()(std::span<const double> x) const {
  return output_sequence(x).at(readout_position - 1);
}

nlohmann::json stack_to_json(const ConstructedStack& s) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : s.blocks) blocks.push_back(to_json(b));
  return {{"input_length", s.input_length},
          {"padded_length", s.padded_length},
          {"encoder", {{"w_in", matrix_to_json(s.w_in)}, {"b", matrix_to_json(s.b_in)}, {"pe", matrix_to_json(s.pe)}}},
          {"blocks", blocks},
          {"readout", {{"w_out", matrix_to_json(s.w_out)}, {"position", s.readout_position}}},
          {"channels", s.channels}};
}

ConstructedStack stack_from_json(const nlohmann::json& j) {
  try {
    ConstructedStack s;
    s.input_length = j.at("input_length").get<std::size_t>();
    s.padded_length = j.at("padded_length").get<std::size_t>();
    s.w_in = matrix_from_json(j.at("encoder").at("w_in"));
    s.b_in = matrix_from_json(j.at("encoder").at("b"));
    s.pe = matrix_from_json(j.at("encoder").at("pe"));
    for (const auto& b : j.at("blocks")) s.blocks.push_back(mamba_block_from_json(b));
    s.w_out = matrix_from_json(j.at("readout").at("w_out"));
    s.readout_position = j.at("readout").at("position").get<std::size_t>();
    s.channels = j.value("channels", std::vector<std::string>{});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("constructed stack: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Builders

BlockBuilder::BlockBuilder() {
  Inner one;
  one.name = "one";
  one.in_bias = 1.0;
  inner_.push_back(one);
}

std::size_t BlockBuilder::add(Inner inner) {
  inner_.push_back(std::move(inner));
  return inner_.size() - 1;
}

MambaBlockWeights BlockBuilder::build(std::size_t D) const {
  const std::size_t E = inner_.size();
  MambaBlockWeights w;
  w.in_w = Matrix(E, D);
  w.in_b = Matrix(E, 1);
  w.conv = Matrix(E, 2);
  w.gate_w = Matrix(E, D);
  w.gate_b = Matrix(E, 1);
  w.out_w = Matrix(D, E);
  w.out_b = Matrix(D, 1);
  w.s6.s_b = Matrix(1, E);
  w.s6.s_c = Matrix(1, E);
  w.s6.s_delta = Matrix(E, E);
  w.s6.a = Matrix(E, 1);
  w.s6.s_b(0, 0) = 1.0;
  w.s6.s_c(0, 0) = 1.0;
  for (std::size_t e = 0; e < E; ++e) {
    const Inner& in = inner_[e];
    w.conv(e, 1) = 1.0;
    for (const auto& [d, v] : in.in) w.in_w(e, d) += v;
    w.in_b(e, 0) = in.in_bias;
    for (const auto& [d, v] : in.gate) w.gate_w(e, d) += v;
    w.gate_b(e, 0) = in.gate_bias;
    for (const auto& [f, v] : in.delta) w.s6.s_delta(e, f) += v;
    w.s6.a(e, 0) = in.a;
    for (const auto& [d, v] : in.out) w.out_w(d, e) += v;
  }
  w.variant = S6Variant::simplified_poly(3, 3, true);
  w.flags = {false, false, true};
  return w;
}

StackBuilder::StackBuilder(std::size_t input_length, std::size_t padded_length, std::size_t n_blocks)
    : input_length_(input_length), padded_(padded_length), blocks_(n_blocks) {
  if (padded_length < input_length) {
    throw InputError("padded length " + std::to_string(padded_length) + " below input length " +
                     std::to_string(input_length));
  }
  add_channel("input");
}

std::size_t StackBuilder::add_channel(const std::string& name) {
  names_.push_back(name);
  pe_.emplace_back(padded_, 0.0);
  return names_.size() - 1;
}

void StackBuilder::preload(std::size_t c, const std::vector<double>& values) {
  for (std::size_t t = 0; t < padded_; ++t) pe_.at(c)[t] += values.at(t);
}

std::vector<double> StackBuilder::indicator(std::size_t first, std::size_t last) const {
  std::vector<double> v(padded_, 0.0);
  for (std::size_t t = std::max<std::size_t>(first, 1); t <= last && t <= padded_; ++t) v[t - 1] = 1.0;
  return v;
}

std::size_t StackBuilder::add_indicator(const std::string& name, std::size_t first, std::size_t last) {
  const std::size_t c = add_channel(name);
  preload(c, indicator(first, last));
  return c;
}

ConstructedStack StackBuilder::finish(std::size_t out_channel, std::size_t readout_position) const {
  const std::size_t D = names_.size();
  if (readout_position == 0 || readout_position > padded_) {
    throw InputError("readout position " + std::to_string(readout_position) + " outside 1.." +
                     std::to_string(padded_));
  }
  ConstructedStack s;
  s.input_length = input_length_;
  s.padded_length = padded_;
  s.w_in = Matrix(D, 1);
  s.w_in(0, 0) = 1.0;
  s.b_in = Matrix(D, 1);
  s.pe = Matrix(padded_, D);
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t t = 0; t < padded_; ++t) s.pe(t, d) = pe_[d][t];
  for (const auto& b : blocks_) s.blocks.push_back(b.build(D));
  s.w_out = Matrix(D, 1);
  s.w_out(out_channel, 0) = 1.0;
  s.readout_position = readout_position;
  s.channels = names_;
  return s;
}

// ---------------------------------------------------------------------------
// Stages

std::size_t build_position_selector(StackBuilder& sb, std::size_t k, std::size_t source, std::uint32_t j,
                                    const std::string& tag) {
  if (j == 0 || j > sb.padded_length()) {
    throw InputError("selector position " + std::to_string(j) + " outside 1.." + std::to_string(sb.padded_length()));
  }
  const std::size_t ind = sb.add_indicator(tag + ".at", j, j);
  const std::size_t out = sb.add_channel(tag + ".selected");
  BlockBuilder::Inner in;
  in.name = tag + ".select";
  in.in = {{source, 1.0}};
  in.gate = {{ind, 1.0}};
  in.out = {{out, 1.0}};
  sb.block(k).add(std::move(in));
  return out;
}

DuplicatedRun build_duplicator(StackBuilder& sb, std::size_t k, std::size_t spike, std::uint32_t j,
                               std::size_t copies, double fill_after, const std::string& tag) {
  if (copies == 0) throw InputError("duplicator: copies must be positive");
  const std::size_t last = j + copies - 1;
  if (j == 0 || last > sb.padded_length()) {
    throw InputError("duplicator: run " + std::to_string(j) + ".." + std::to_string(last) +
                     " exceeds padded length " + std::to_string(sb.padded_length()));
  }
  DuplicatedRun r;
  r.first = j;
  r.copies = copies;
  const std::size_t run = sb.add_indicator(tag + ".run", j, last);
  const std::size_t run_shift = sb.add_indicator(tag + ".run_shift", j + 1, last);
  r.after = sb.add_indicator(tag + ".after", last + 1, sb.padded_length());
  r.z = sb.add_channel(tag + ".z");
  r.z_shift = sb.add_channel(tag + ".z_shift");
  if (fill_after != 0.0) {
    std::vector<double> fill = sb.indicator(last + 1, sb.padded_length());
    for (double& v : fill) v *= fill_after;
    sb.preload(r.z, fill);
    sb.preload(r.z_shift, fill);
  }
  for (auto [gate, out, name] : {std::tuple{run, r.z, ".spread"}, std::tuple{run_shift, r.z_shift, ".spread_shift"}}) {
    BlockBuilder::Inner in;
    in.name = tag + name;
    in.in = {{spike, 1.0}};
    in.a = 1.0;  // running sum
    in.gate = {{gate, 1.0}};
    in.out = {{out, 1.0}};
    sb.block(k).add(std::move(in));
  }
  return r;
}

void build_power_block(StackBuilder& sb, std::size_t k, const DuplicatedRun& run, std::size_t out, double coeff,
                       std::optional<std::size_t> gate, const std::string& tag) {
  BlockBuilder& b = sb.block(k);
  BlockBuilder::Inner src;
  src.name = tag + ".transition";
  src.in = {{run.z, 1.0}};
  const std::size_t src_idx = b.add(std::move(src));

  const std::pair<std::size_t, double> terms[2] = {{run.z, coeff}, {run.z_shift, -coeff}};
  const char* names[2] = {".full", ".shifted"};
  for (int i = 0; i < 2; ++i) {
    BlockBuilder::Inner in;
    in.name = tag + names[i];
    in.in = {{terms[i].first, 1.0}, {run.after, -1.0}};
    in.delta = {{src_idx, 1.0}};
    if (gate) {
      in.gate = {{*gate, 1.0}};
    } else {
      in.gate_bias = 1.0;
    }
    in.out = {{out, terms[i].second}};
    b.add(std::move(in));
  }
}

ConstructedStack construct_monomial_model(const MonomialSpec& spec, std::size_t L) {
  if (spec.var == 0 || spec.var > L) {
    throw InputError("monomial variable x" + std::to_string(spec.var) + " outside 1.." + std::to_string(L));
  }
  if (spec.power == 0) throw InputError("monomial power must be positive");
  const std::size_t padded = std::max<std::size_t>(L, spec.var + spec.power + 2);
  StackBuilder sb(L, padded, 3);
  const std::size_t out = sb.add_channel("output");
  const std::string tag = "x" + std::to_string(spec.var);
  const std::size_t sel = build_position_selector(sb, 0, sb.input_channel(), spec.var, tag);
  const DuplicatedRun run = build_duplicator(sb, 1, sel, spec.var, spec.power, 1.0, tag);
  build_power_block(sb, 2, run, out, spec.coeff, std::nullopt, tag);
  return sb.finish(out, padded);
}

ConstructedStack construct_polynomial_model(const MultiPoly& target, std::size_t L) {
  if (target.n_vars() != L) {
    throw DimensionError("target over " + std::to_string(target.n_vars()) + " variables for input length " +
                         std::to_string(L));
  }
  // Factors of each term land at consecutive slots after q0, where every
  // needed power is already available.
  std::size_t q0 = 1;
  std::size_t max_factors = 0;
  for (const auto& [m, c] : target.terms()) {
    for (const auto& [v, p] : m.exponents()) q0 = std::max<std::size_t>(q0, v + p - 1);
    max_factors = std::max(max_factors, m.exponents().size());
  }
  const std::size_t padded = std::max<std::size_t>(L, q0 + max_factors + 2);
  StackBuilder sb(L, padded, 4);
  const std::size_t out = sb.add_channel("output");

  std::size_t i = 0;
  for (const auto& [m, c] : target.terms()) {
    const std::string term = "t" + std::to_string(i++);
    const std::size_t M = m.exponents().size();
    const std::size_t f = sb.add_channel(term + ".factors");
    const std::size_t lead = sb.add_indicator(term + ".lead", q0, q0);
    const std::size_t after = sb.add_indicator(term + ".after", q0 + M + 1, padded);
    sb.preload(f, sb.indicator(q0, q0));
    sb.preload(f, sb.indicator(q0 + M + 1, padded));

    std::size_t slot = q0 + 1;
    for (const auto& [v, p] : m.exponents()) {
      const std::string tag = term + ".x" + std::to_string(v);
      const std::size_t sel = build_position_selector(sb, 0, sb.input_channel(), v, tag);
      const DuplicatedRun run = build_duplicator(sb, 1, sel, v, p, 1.0, tag);
      const std::size_t gate = sb.add_indicator(tag + ".slot", slot, slot);
      build_power_block(sb, 2, run, f, 1.0, gate, tag);
      ++slot;
    }

    BlockBuilder& b = sb.block(3);
    BlockBuilder::Inner src;
    src.name = term + ".transition";
    src.in = {{f, 1.0}};
    const std::size_t src_idx = b.add(std::move(src));
    BlockBuilder::Inner full;
    full.name = term + ".full";
    full.in = {{f, 1.0}, {after, -1.0}};
    full.delta = {{src_idx, 1.0}};
    full.gate_bias = 1.0;
    full.out = {{out, c}};
    BlockBuilder::Inner shifted = full;
    shifted.name = term + ".shifted";
    shifted.in.push_back({lead, -1.0});
    shifted.out = {{out, -c}};
    b.add(std::move(full));
    b.add(std::move(shifted));
  }
  return sb.finish(out, padded);
}

ConstructedStack selector_stack(std::size_t L, std::uint32_t j) {
  StackBuilder sb(L, L, 1);
  const std::size_t out = build_position_selector(sb, 0, sb.input_channel(), j, "x" + std::to_string(j));
  return sb.finish(out, L);
}

ConstructedStack duplicator_stack(std::size_t L, std::uint32_t j, std::size_t copies, double fill_after) {
  StackBuilder sb(L, L, 1);
  const DuplicatedRun r = build_duplicator(sb, 0, sb.input_channel(), j, copies, fill_after, "spike");
  return sb.finish(r.z, L);
}

// ---------------------------------------------------------------------------
// Verification

VerifyReport verify_construction(const ConstructedStack& stack, const MultiPoly& target, std::size_t n_trials,
                                 double lo, double hi, double tolerance, std::uint64_t seed) {
  if (target.n_vars() != stack.input_length) {
    throw DimensionError("verify: target over " + std::to_string(target.n_vars()) + " variables, stack input " +
                         std::to_string(stack.input_length));
  }
  VerifyReport r{n_trials, lo, hi, 0.0, tolerance, false};
  Rng rng(seed);
  std::vector<double> x(stack.input_length);
  for (std::size_t trial = 0; trial < n_trials; ++trial) {
    Rng draw = rng.split(trial);
    for (double& v : x) v = draw.uniform(lo, hi);
    const double model = stack(x);
    const double want = target.eval(x);
    double rel = 0.0;
    if (model != want) rel = want == 0.0 ? std::abs(model) : std::abs(model - want) / std::abs(want);
    if (!std::isfinite(rel)) rel = INFINITY;
    r.max_rel_err = std::max(r.max_rel_err, rel);
  }
  r.pass = r.max_rel_err <= tolerance;
  return r;
}

nlohmann::json verify_report_to_json(const VerifyReport& r, const MultiPoly& target) {
  return {{"target", poly_to_json(target)},
          {"target_text", target.to_string()},
          {"n_trials", r.n_trials},
          {"box", {r.lo, r.hi}},
          {"tolerance", r.tolerance},
          {"max_rel_err", r.max_rel_err},
          {"pass", r.pass}};
}

}  // namespace polyssm
