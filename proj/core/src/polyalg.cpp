#include "polyssm/polyalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "polyssm/rng.hpp"

namespace polyssm {

// ---------------------------------------------------------------------------
// Monomial

Monomial::Monomial(std::vector<Exponent> exps) {
  std::sort(exps.begin(), exps.end());
  for (const auto& [v, p] : exps) {
    if (v == 0) throw InputError("monomial: variable indices are 1-based");
    if (p == 0) continue;
    if (!exps_.empty() && exps_.back().first == v) {
      exps_.back().second += p;
    } else {
      exps_.emplace_back(v, p);
    }
  }
}

Monomial Monomial::var(std::uint32_t index, std::uint32_t power) { return Monomial({{index, power}}); }

std::uint32_t Monomial::total_degree() const noexcept {
  std::uint32_t d = 0;
  for (const auto& e : exps_) d += e.second;
  return d;
}

std::uint32_t Monomial::power_of(std::uint32_t var) const noexcept {
  for (const auto& e : exps_)
    if (e.first == var) return e.second;
  return 0;
}

Monomial Monomial::operator*(const Monomial& o) const {
  Monomial out;
  out.exps_.reserve(exps_.size() + o.exps_.size());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < exps_.size() || j < o.exps_.size()) {
    if (j == o.exps_.size() || (i < exps_.size() && exps_[i].first < o.exps_[j].first)) {
      out.exps_.push_back(exps_[i++]);
    } else if (i == exps_.size() || o.exps_[j].first < exps_[i].first) {
      out.exps_.push_back(o.exps_[j++]);
    } else {
      out.exps_.emplace_back(exps_[i].first, exps_[i].second + o.exps_[j].second);
      ++i;
      ++j;
    }
  }
  return out;
}

double Monomial::eval(std::span<const double> x) const {
  double v = 1.0;
  for (const auto& [var, p] : exps_) {
    const double base = x[var - 1];
    for (std::uint32_t k = 0; k < p; ++k) v *= base;
  }
  return v;
}

std::string Monomial::to_string() const {
  if (exps_.empty()) return "1";
  std::string s;
  for (const auto& [v, p] : exps_) {
    if (!s.empty()) s += "*";
    s += "x" + std::to_string(v);
    if (p > 1) s += "^" + std::to_string(p);
  }
  return s;
}

bool GradedLex::operator()(const Monomial& a, const Monomial& b) const noexcept {
  const auto da = a.total_degree();
  const auto db = b.total_degree();
  if (da != db) return da < db;
  const auto& ea = a.exponents();
  const auto& eb = b.exponents();
  std::size_t i = 0;
  while (i < ea.size() && i < eb.size()) {
    if (ea[i] != eb[i]) {
      if (ea[i].first != eb[i].first) return ea[i].first < eb[i].first;
      return ea[i].second > eb[i].second;
    }
    ++i;
  }
  // Equal degree and a common prefix means both lists end together.
  return false;
}

// ---------------------------------------------------------------------------
// MultiPoly

MultiPoly MultiPoly::constant(std::size_t n_vars, double c) {
  MultiPoly p(n_vars);
  p.add_term(Monomial(), c);
  return p;
}

MultiPoly MultiPoly::variable(std::size_t n_vars, std::uint32_t index) {
  if (index == 0 || index > n_vars) {
    throw InputError("variable x" + std::to_string(index) + " outside 1.." + std::to_string(n_vars));
  }
  MultiPoly p(n_vars);
  p.add_term(Monomial::var(index), 1.0);
  return p;
}

double MultiPoly::coeff(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

void MultiPoly::add_term(const Monomial& m, double c) {
  if (m.max_var() > n_vars_) {
    throw DimensionError("monomial " + m.to_string() + " uses a variable beyond n_vars=" + std::to_string(n_vars_));
  }
  auto [it, inserted] = terms_.try_emplace(m, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) < kPruneBelow) terms_.erase(it);
}

namespace {

void require_same_vars(const MultiPoly& p, const MultiPoly& q, const char* op) {
  if (p.n_vars() != q.n_vars()) {
    throw DimensionError(std::string(op) + ": polynomials over " + std::to_string(p.n_vars()) + " and " +
                         std::to_string(q.n_vars()) + " variables");
  }
}

// Open-addressing accumulator keyed by packed exponent vectors.
class PackedAccumulator {
 public:
  explicit PackedAccumulator(std::size_t expected) {
    std::size_t cap = 16;
    while (cap < 2 * expected) cap <<= 1;
    keys_.assign(cap, kEmpty);
    vals_.assign(cap, 0.0);
  }

  void add(std::uint64_t key, double v) {
    if (2 * (used_ + 1) > keys_.size()) grow();
    std::size_t mask = keys_.size() - 1;
    std::size_t i = mix64(key) & mask;
    while (keys_[i] != kEmpty && keys_[i] != key) i = (i + 1) & mask;
    if (keys_[i] == kEmpty) {
      keys_[i] = key;
      ++used_;
    }
    vals_[i] += v;
  }

  template <class F>
  void for_each(F&& f) const {
    for (std::size_t i = 0; i < keys_.size(); ++i)
      if (keys_[i] != kEmpty) f(keys_[i], vals_[i]);
  }

 private:
  static constexpr std::uint64_t kEmpty = ~0ULL;

  void grow() {
    std::vector<std::uint64_t> old_keys = std::move(keys_);
    std::vector<double> old_vals = std::move(vals_);
    keys_.assign(old_keys.size() * 2, kEmpty);
    vals_.assign(old_keys.size() * 2, 0.0);
    used_ = 0;
    for (std::size_t i = 0; i < old_keys.size(); ++i)
      if (old_keys[i] != kEmpty) add(old_keys[i], old_vals[i]);
  }

  std::vector<std::uint64_t> keys_;
  std::vector<double> vals_;
  std::size_t used_ = 0;
};

std::vector<std::uint32_t> max_powers(const MultiPoly& p) {
  std::vector<std::uint32_t> m(p.n_vars() + 1, 0);
  for (const auto& [mono, c] : p.terms())
    for (const auto& [v, e] : mono.exponents()) m[v] = std::max(m[v], e);
  return m;
}

}  // namespace

MultiPoly MultiPoly::operator+(const MultiPoly& o) const {
  require_same_vars(*this, o, "poly add");
  MultiPoly out = *this;
  for (const auto& [m, c] : o.terms_) out.add_term(m, c);
  return out;
}

MultiPoly MultiPoly::operator-(const MultiPoly& o) const { return *this + o * -1.0; }

MultiPoly MultiPoly::operator*(double s) const {
  MultiPoly out(n_vars_);
  for (const auto& [m, c] : terms_) out.add_term(m, c * s);
  return out;
}

MultiPoly MultiPoly::operator*(const MultiPoly& o) const {
  require_same_vars(*this, o, "poly mul");
  MultiPoly out(n_vars_);
  if (is_zero() || o.is_zero()) return out;

  const std::size_t n = n_vars_;
  bool packable = n > 0 && n <= 16;
  unsigned bits = packable ? static_cast<unsigned>(64 / n) : 0;
  if (packable) {
    const auto mp = max_powers(*this);
    const auto mq = max_powers(o);
    const std::uint64_t limit = (bits >= 64 ? ~0ULL : (1ULL << bits) - 1);
    for (std::size_t v = 1; v <= n; ++v)
      if (static_cast<std::uint64_t>(mp[v]) + mq[v] >= limit) packable = false;
  }

  if (!packable) {
    for (const auto& [ma, ca] : terms_)
      for (const auto& [mb, cb] : o.terms_) out.add_term(ma * mb, ca * cb);
    return out;
  }

  auto pack = [&](const Monomial& m) {
    std::uint64_t key = 0;
    for (const auto& [v, e] : m.exponents()) key += static_cast<std::uint64_t>(e) << (bits * (v - 1));
    return key;
  };
  std::vector<std::pair<std::uint64_t, double>> a;
  std::vector<std::pair<std::uint64_t, double>> b;
  for (const auto& [m, c] : terms_) a.emplace_back(pack(m), c);
  for (const auto& [m, c] : o.terms_) b.emplace_back(pack(m), c);

  PackedAccumulator acc(std::max(a.size(), b.size()));
  for (const auto& [ka, ca] : a)
    for (const auto& [kb, cb] : b) acc.add(ka + kb, ca * cb);

  const std::uint64_t field = bits >= 64 ? ~0ULL : (1ULL << bits) - 1;
  acc.for_each([&](std::uint64_t key, double c) {
    if (std::abs(c) < kPruneBelow) return;
    std::vector<Monomial::Exponent> exps;
    for (std::size_t v = 1; v <= n; ++v) {
      const auto e = static_cast<std::uint32_t>((key >> (bits * (v - 1))) & field);
      if (e) exps.emplace_back(static_cast<std::uint32_t>(v), e);
    }
    out.terms_.emplace(Monomial(std::move(exps)), c);
  });
  return out;
}

double MultiPoly::eval(std::span<const double> x) const {
  if (x.size() != n_vars_) {
    throw DimensionError("poly_eval: " + std::to_string(x.size()) + " values for " + std::to_string(n_vars_) +
                         " variables");
  }
  double s = 0.0;
  for (const auto& [m, c] : terms_) s += c * m.eval(x);
  return s;
}

std::uint32_t MultiPoly::max_total_degree() const noexcept {
  // Graded order puts the highest degree last.
  return terms_.empty() ? 0 : terms_.rbegin()->first.total_degree();
}

std::string MultiPoly::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& [m, c] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << c;
    if (!m.is_constant()) os << "*" << m.to_string();
  }
  return os.str();
}

MultiPoly poly_arith(PolyOp kind, const MultiPoly& p, const MultiPoly& q) {
  switch (kind) {
    case PolyOp::Add: return p + q;
    case PolyOp::Mul: return p * q;
    case PolyOp::Scale: break;
  }
  throw InputError("poly_arith: scale takes a scalar operand");
}

MultiPoly poly_arith(PolyOp kind, const MultiPoly& p, double s) {
  if (kind != PolyOp::Scale) throw InputError("poly_arith: add/mul take a polynomial operand");
  return p * s;
}

double poly_eval(const MultiPoly& p, std::span<const double> x) { return p.eval(x); }

PolyStats poly_stats(const MultiPoly& p) { return {p.max_total_degree(), p.n_monomials()}; }

nlohmann::json poly_to_json(const MultiPoly& p) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [m, c] : p.terms()) {
    nlohmann::json exps = nlohmann::json::array();
    for (const auto& [v, e] : m.exponents()) exps.push_back({v, e});
    terms.push_back({{"exps", exps}, {"coeff", c}});
  }
  return {{"n_vars", p.n_vars()}, {"terms", terms}};
}

MultiPoly poly_from_json(const nlohmann::json& j) {
  try {
    MultiPoly p(j.at("n_vars").get<std::size_t>());
    for (const auto& t : j.at("terms")) {
      std::vector<Monomial::Exponent> exps;
      for (const auto& e : t.at("exps")) exps.emplace_back(e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>());
      p.add_term(Monomial(std::move(exps)), t.at("coeff").get<double>());
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("polynomial: ") + e.what());
  } catch (const InputError& e) {
    throw ParseError(std::string("polynomial: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("polynomial: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Extraction

std::vector<MultiPoly> extract_s6_channel_poly(const S6Weights& w, std::size_t L, const S6Variant& variant) {
  w.validate();
  if (w.channels() != 1 || w.state_size() != 1) {
    throw UnsupportedError("S6 extraction handles D=1, N=1 only; got D=" + std::to_string(w.channels()) +
                           ", N=" + std::to_string(w.state_size()));
  }
  if (variant.kind != S6Variant::Kind::SimplifiedPoly || !variant.linear_pA) {
    throw UnsupportedError("S6 extraction requires the simplified polynomial variant with linear p_A, got " +
                           variant.tag());
  }
  const double sb = w.s_b(0, 0);
  const double sc = w.s_c(0, 0);
  const double sd = w.s_delta(0, 0);
  const double a = w.a(0, 0);
  std::vector<MultiPoly> out;
  MultiPoly h(L);
  for (std::uint32_t t = 1; t <= L; ++t) {
    const MultiPoly x = MultiPoly::variable(L, t);
    MultiPoly abar = x * sd + MultiPoly::constant(L, a);
    h = abar * h + x * x * sb;
    out.push_back(x * h * sc);
  }
  return out;
}

MultiPoly extract_attention_poly(const AttentionWeights& w, std::size_t L) {
  w.validate();
  if (w.channels() != 1) {
    throw UnsupportedError("attention extraction handles D=1 only; got D=" + std::to_string(w.channels()));
  }
  const double k = w.scale * w.w_q(0, 0) * w.w_k(0, 0) * w.w_v(0, 0);
  MultiPoly y(L);
  const auto last = static_cast<std::uint32_t>(L);
  for (std::uint32_t j = 1; j <= L; ++j) y.add_term(Monomial::var(j, 2) * Monomial::var(last), k);
  return y;
}

MultiPoly extract_lti_ssm_poly(const Matrix& a_bar, const Matrix& b_bar, const Matrix& c, std::size_t L) {
  const std::size_t n = a_bar.size();
  if (b_bar.size() != n || c.size() != n) {
    throw DimensionError("LTI extraction: a_bar " + a_bar.shape_string() + ", b_bar " + b_bar.shape_string() +
                         ", c " + c.shape_string());
  }
  MultiPoly y(L);
  for (std::uint32_t j = 1; j <= L; ++j) {
    double kernel = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      kernel += c.entries()[k] * std::pow(a_bar.entries()[k], static_cast<double>(L - j)) * b_bar.entries()[k];
    }
    y.add_term(Monomial::var(j), kernel);
  }
  return y;
}

std::vector<MultiPoly> attention_layer_symbolic(const std::vector<MultiPoly>& inputs, const AttentionWeights& w,
                                                bool last_only) {
  w.validate();
  if (w.channels() != 1) {
    throw UnsupportedError("symbolic attention handles D=1 only; got D=" + std::to_string(w.channels()));
  }
  const std::size_t L = inputs.size();
  const std::size_t n = L ? inputs[0].n_vars() : 0;
  const double qk = w.scale * w.w_q(0, 0) * w.w_k(0, 0) * w.w_v(0, 0);
  std::vector<MultiPoly> out(L, MultiPoly(n));
  // Running sum of k_j v_j over j <= t; every output is q_t times it.
  MultiPoly running(n);
  for (std::size_t t = 0; t < L; ++t) {
    running = running + inputs[t] * inputs[t];
    if (!last_only || t + 1 == L) out[t] = inputs[t] * running * qk;
  }
  return out;
}

MultiPoly stacked_attention_poly(std::size_t L, std::span<const AttentionWeights> layers) {
  std::vector<MultiPoly> cur;
  for (std::uint32_t t = 1; t <= L; ++t) cur.push_back(MultiPoly::variable(L, t));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    cur = attention_layer_symbolic(cur, layers[i], i + 1 == layers.size());
  }
  return cur.empty() ? MultiPoly(L) : cur.back();
}

std::size_t attention_layers_needed(std::uint64_t degree) {
  std::size_t n = 0;
  std::uint64_t reach = 1;
  while (reach < degree) {
    reach *= 3;
    ++n;
  }
  return n;
}

}  // namespace polyssm
