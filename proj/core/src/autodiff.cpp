#include "polyssm/autodiff.hpp"

namespace polyssm::ad {

Tape::Tape() {
  offset_.reserve(1 << 16);
  parent_.reserve(1 << 17);
  partial_.reserve(1 << 17);
  offset_.push_back(0);
}

void Tape::clear() {
  offset_.resize(1);
  parent_.clear();
  partial_.clear();
}

std::uint32_t Tape::leaf() {
  if (!recording_) return kConstant;
  offset_.push_back(static_cast<std::uint32_t>(parent_.size()));
  return static_cast<std::uint32_t>(offset_.size() - 2);
}

std::uint32_t Tape::node(std::uint32_t p0, double d0) {
  if (!recording_ || p0 == kConstant) return kConstant;
  parent_.push_back(p0);
  partial_.push_back(d0);
  offset_.push_back(static_cast<std::uint32_t>(parent_.size()));
  return static_cast<std::uint32_t>(offset_.size() - 2);
}

std::uint32_t Tape::node(std::uint32_t p0, double d0, std::uint32_t p1, double d1) {
  if (!recording_ || (p0 == kConstant && p1 == kConstant)) return kConstant;
  if (p0 != kConstant) {
    parent_.push_back(p0);
    partial_.push_back(d0);
  }
  if (p1 != kConstant) {
    parent_.push_back(p1);
    partial_.push_back(d1);
  }
  offset_.push_back(static_cast<std::uint32_t>(parent_.size()));
  return static_cast<std::uint32_t>(offset_.size() - 2);
}

std::uint32_t Tape::node(std::span<const std::uint32_t> parents, std::span<const double> partials) {
  if (!recording_) return kConstant;
  const std::size_t before = parent_.size();
  for (std::size_t i = 0; i < parents.size(); ++i) {
    if (parents[i] == kConstant) continue;
    parent_.push_back(parents[i]);
    partial_.push_back(partials[i]);
  }
  if (parent_.size() == before) return kConstant;
  offset_.push_back(static_cast<std::uint32_t>(parent_.size()));
  return static_cast<std::uint32_t>(offset_.size() - 2);
}

void Tape::backward(std::uint32_t root, std::vector<double>& adjoint) const {
  const std::size_t n = size();
  adjoint.assign(n, 0.0);
  if (root == kConstant || root >= n) return;
  adjoint[root] = 1.0;
  for (std::size_t i = root + 1; i-- > 0;) {
    const double a = adjoint[i];
    if (a == 0.0) continue;
    for (std::uint32_t e = offset_[i]; e < offset_[i + 1]; ++e) {
      adjoint[parent_[e]] += partial_[e] * a;
    }
  }
}

Tape& tape() {
  thread_local Tape t;
  return t;
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  thread_local std::vector<std::uint32_t> parents;
  thread_local std::vector<double> partials;
  parents.clear();
  partials.clear();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i].value() * b[i].value();
    parents.push_back(a[i].id());
    partials.push_back(b[i].value());
    parents.push_back(b[i].id());
    partials.push_back(a[i].value());
  }
  return Var(s, tape().node(parents, partials));
}

Var sum(std::span<const Var> terms) {
  thread_local std::vector<std::uint32_t> parents;
  thread_local std::vector<double> partials;
  parents.clear();
  partials.clear();
  double s = 0.0;
  for (const Var& t : terms) {
    s += t.value();
    parents.push_back(t.id());
    partials.push_back(1.0);
  }
  return Var(s, tape().node(parents, partials));
}

std::vector<double> gradient(const Var& root, std::span<const Var> wrt) {
  std::vector<double> adjoint;
  tape().backward(root.id(), adjoint);
  std::vector<double> out(wrt.size(), 0.0);
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    const auto id = wrt[i].id();
    if (id != kConstant && id < adjoint.size()) out[i] = adjoint[id];
  }
  return out;
}

}  // namespace polyssm::ad
