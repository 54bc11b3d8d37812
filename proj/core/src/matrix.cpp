#include "polyssm/matrix.hpp"

#include <algorithm>

namespace polyssm {

Matrix elementwise(Elementwise kind, std::span<const Matrix> args, double factor) {
  switch (kind) {
    case Elementwise::Softplus:
    case Elementwise::Exp:
    case Elementwise::Silu:
      if (args.size() != 1) throw InputError("elementwise: unary operation given " + std::to_string(args.size()) + " operands");
      return map_unary(kind, args[0]);
    case Elementwise::Hadamard:
    case Elementwise::Add:
    case Elementwise::Sub:
      if (args.size() != 2) throw InputError("elementwise: binary operation given " + std::to_string(args.size()) + " operands");
      return map_binary(kind, args[0], args[1]);
    case Elementwise::Scale:
      if (args.size() != 1) throw InputError("elementwise: scale given " + std::to_string(args.size()) + " operands");
      return scale(args[0], factor);
  }
  throw InputError("elementwise: unknown operation");
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.entries()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double v : m.entries()) best = std::max(best, std::abs(v));
  return best;
}

double max_row_norm(const Matrix& m) {
  double best = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) s += v * v;
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

double spectral_norm(const Matrix& m) {
  if (m.empty()) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return frobenius_norm(m);
  const std::size_t n = m.cols();
  // Gram matrix G = m^T m; its top eigenvalue is sigma_max^2.
  Matrix g = matmul(transpose(m), m);
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  // Perturb the start so it is not orthogonal to the top eigenvector by symmetry.
  for (std::size_t i = 0; i < n; ++i) v[i] += 1e-3 * static_cast<double>(i + 1);
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w[i] += g(i, j) * v[j];
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    if (std::abs(norm - lambda) <= 1e-15 * norm) {
      lambda = norm;
      break;
    }
    lambda = norm;
  }
  return std::sqrt(lambda);
}

}  // namespace polyssm
