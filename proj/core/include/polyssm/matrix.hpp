#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "polyssm/autodiff.hpp"
#include "polyssm/errors.hpp"
#include "polyssm/scalar.hpp"

namespace polyssm {

// Dense row-major matrix. T is double for plain evaluation and ad::Var when
// gradients are needed; all algorithms below are written once for both.
template <class T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, const T& fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows * cols) {
      throw DimensionError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                           " given " + std::to_string(data_.size()) + " entries");
    }
  }

  static BasicMatrix from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<T> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged rows in matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return BasicMatrix(r, c, std::move(data));
  }

  static BasicMatrix identity(std::size_t n) {
    BasicMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1.0);
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> entries() noexcept { return data_; }
  std::span<const T> entries() const noexcept { return data_; }
  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::string shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

  bool operator==(const BasicMatrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<double>;

template <class T>
void require_finite(const BasicMatrix<T>& m, const char* op) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(value_of(m.entries()[i]))) {
      throw NumericError(std::string(op) + ": non-finite entry at (" +
                         std::to_string(i / m.cols()) + "," + std::to_string(i % m.cols()) + ")");
    }
  }
}

template <class T>
void require_same_shape(const BasicMatrix<T>& a, const BasicMatrix<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shapes " + a.shape_string() + " and " +
                         b.shape_string() + " differ");
  }
}

template <class T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + a.shape_string() + " times " + b.shape_string());
  }
  BasicMatrix<T> out(a.rows(), b.cols());
  std::vector<T> column(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t k = 0; k < b.rows(); ++k) column[k] = b(k, j);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      out(i, j) = dot(a.row(i), std::span<const T>(column));
    }
  }
  require_finite(out, "matmul");
  return out;
}

template <class T>
BasicMatrix<T> transpose(const BasicMatrix<T>& a) {
  BasicMatrix<T> out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

enum class Elementwise { Softplus, Exp, Silu, Hadamard, Add, Sub, Scale };

template <class T>
BasicMatrix<T> map_unary(Elementwise kind, const BasicMatrix<T>& a) {
  using std::exp;
  BasicMatrix<T> out(a.rows(), a.cols());
  auto src = a.entries();
  auto dst = out.entries();
  for (std::size_t i = 0; i < src.size(); ++i) {
    switch (kind) {
      case Elementwise::Softplus: dst[i] = softplus(src[i]); break;
      case Elementwise::Exp: dst[i] = exp(src[i]); break;
      case Elementwise::Silu: dst[i] = silu(src[i]); break;
      default: throw InputError("map_unary: operation takes two operands");
    }
  }
  require_finite(out, "elementwise");
  return out;
}

template <class T>
BasicMatrix<T> map_binary(Elementwise kind, const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  require_same_shape(a, b, "elementwise");
  BasicMatrix<T> out(a.rows(), a.cols());
  auto x = a.entries();
  auto y = b.entries();
  auto dst = out.entries();
  for (std::size_t i = 0; i < x.size(); ++i) {
    switch (kind) {
      case Elementwise::Hadamard: dst[i] = x[i] * y[i]; break;
      case Elementwise::Add: dst[i] = x[i] + y[i]; break;
      case Elementwise::Sub: dst[i] = x[i] - y[i]; break;
      default: throw InputError("map_binary: operation takes one operand");
    }
  }
  require_finite(out, "elementwise");
  return out;
}

template <class T>
BasicMatrix<T> scale(const BasicMatrix<T>& a, double s) {
  BasicMatrix<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.entries()[i] = a.entries()[i] * s;
  require_finite(out, "scale");
  return out;
}

template <class T>
BasicMatrix<T> hadamard(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  return map_binary(Elementwise::Hadamard, a, b);
}
template <class T>
BasicMatrix<T> add(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  return map_binary(Elementwise::Add, a, b);
}
template <class T>
BasicMatrix<T> sub(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  return map_binary(Elementwise::Sub, a, b);
}

// Dispatcher over the operand count of `kind`: unary kinds take one matrix,
// binary kinds take two, Scale takes one matrix and `factor`.
Matrix elementwise(Elementwise kind, std::span<const Matrix> args, double factor = 1.0);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
// Largest singular value, by power iteration on m^T m.
double spectral_norm(const Matrix& m);
// Max over rows of the row's l2 norm.
double max_row_norm(const Matrix& m);

template <class T>
Matrix values(const BasicMatrix<T>& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.entries()[i] = value_of(m.entries()[i]);
  return out;
}

}  // namespace polyssm
