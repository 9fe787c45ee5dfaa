#pragma once

// Dense row-major matrices, a one-sided Jacobi SVD, and the orthogonality
// helpers the trainer uses to keep Q on the orthogonal group.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ultradense/error.hpp"

namespace ultradense {

class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) {
      throw Error(ErrorKind::InvalidMatrix, "matrix dimensions must be positive");
    }
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (rows == 0 || cols == 0) {
      throw Error(ErrorKind::InvalidMatrix, "matrix dimensions must be positive");
    }
    if (data_.size() != rows * cols) {
      throw Error(ErrorKind::InvalidMatrix, "expected " + std::to_string(rows * cols) +
                                                " entries, got " + std::to_string(data_.size()));
    }
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw Error(ErrorKind::InvalidMatrix, "ragged row list");
      values.insert(values.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(values));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> values() const noexcept { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix& operator+=(const Matrix& other) {
    require_same_shape(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& other) {
    require_same_shape(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  void require_same_shape(const Matrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_) {
      throw Error(ErrorKind::DimensionMismatch, "matrix shapes differ");
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double frobenius_norm(const Matrix& m) { return norm2(m.values()); }

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "inner dimensions differ: " + std::to_string(a.cols()) +
                                                  " vs " + std::to_string(b.rows()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

/// y = M x
inline std::vector<double> multiply(const Matrix& m, std::span<const double> x) {
  if (m.cols() != x.size()) {
    throw Error(ErrorKind::DimensionMismatch, "matrix has " + std::to_string(m.cols()) +
                                                  " columns, vector has " + std::to_string(x.size()));
  }
  std::vector<double> y(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row(i), x);
  return y;
}

/// ‖MᵀM − I‖_F
inline double orthogonality_error(const Matrix& m) {
  const std::size_t n = m.cols();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double g = 0.0;
      for (std::size_t r = 0; r < m.rows(); ++r) g += m(r, i) * m(r, j);
      const double diff = g - (i == j ? 1.0 : 0.0);
      sum += diff * diff;
    }
  }
  return std::sqrt(sum);
}

inline bool is_orthogonal(const Matrix& m, double tol) {
  return m.is_square() && orthogonality_error(m) <= tol;
}

struct SvdResult {
  Matrix u;
  std::vector<double> s;  // descending, non-negative
  Matrix v;

  Matrix reconstruct() const {
    Matrix us = u;
    for (std::size_t i = 0; i < us.rows(); ++i)
      for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= s[j];
    return us * v.transposed();
  }
};

namespace detail {

// Completes the orthonormal set `basis` (rows of length n, some flagged as
// missing) with vectors built from the standard basis. Used for the left
// singular vectors belonging to (numerically) zero singular values.
inline void complete_orthonormal(std::vector<std::vector<double>>& basis, std::vector<bool>& present) {
  const std::size_t n = basis.size();
  std::size_t candidate = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (present[j]) continue;
    while (candidate < n) {
      std::vector<double> v(n, 0.0);
      v[candidate++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < n; ++k) {
          if (!present[k]) continue;
          const double proj = dot(v, basis[k]);
          for (std::size_t i = 0; i < n; ++i) v[i] -= proj * basis[k][i];
        }
      }
      const double nv = norm2(v);
      if (nv > 0.5) {
        for (double& x : v) x /= nv;
        basis[j] = std::move(v);
        present[j] = true;
        break;
      }
    }
  }
}

}  // namespace detail

/// Singular value decomposition of a square matrix by one-sided (Hestenes)
/// Jacobi rotations. Signs and the order of equal singular values are not
/// canonical; only U·diag(S)·Vᵀ and U·Vᵀ are.
inline SvdResult svd(const Matrix& m) {
  if (m.empty() || !m.is_square()) {
    throw Error(ErrorKind::InvalidMatrix, "svd requires a non-empty square matrix, got " +
                                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (!m.all_finite()) throw Error(ErrorKind::InvalidMatrix, "svd input has non-finite entries");

  const std::size_t n = m.rows();
  // cols[j] holds column j of the working matrix A·V; vcols[j] column j of V.
  std::vector<std::vector<double>> cols(n, std::vector<double>(n));
  std::vector<std::vector<double>> vcols(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) cols[j][i] = m(i, j);
    vcols[j][j] = 1.0;
  }

  const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto& cp = cols[p];
        auto& cq = cols[q];
        const double alpha = dot(cp, cp);
        const double beta = dot(cq, cq);
        const double gamma = dot(cp, cq);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double a = cp[i];
          const double b = cq[i];
          cp[i] = c * a - s * b;
          cq[i] = s * a + c * b;
        }
        auto& vp = vcols[p];
        auto& vq = vcols[q];
        for (std::size_t i = 0; i < n; ++i) {
          const double a = vp[i];
          const double b = vq[i];
          vp[i] = c * a - s * b;
          vq[i] = s * a + c * b;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(cols[j]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  const double smax = sigma[order.front()];
  const double zero_cut = smax * static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  std::vector<std::vector<double>> ucols(n);
  std::vector<bool> present(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    if (sigma[j] > zero_cut && sigma[j] > 0.0) {
      ucols[k] = cols[j];
      for (double& x : ucols[k]) x /= sigma[j];
      present[k] = true;
    }
  }
  detail::complete_orthonormal(ucols, present);

  SvdResult out{Matrix(n, n), std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.s[k] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) {
      out.u(i, k) = ucols[k][i];
      out.v(i, k) = vcols[j][i];
    }
  }
  return out;
}

/// Smallest singular value below which nearest_orthogonal refuses to project.
inline constexpr double kRankTolerance = 1e-12;

/// U·Vᵀ from the SVD of `m`: the closest orthogonal matrix in both the spectral
/// and the Frobenius norm.
inline Matrix nearest_orthogonal(const Matrix& m) {
  const SvdResult f = svd(m);
  if (!(f.s.back() > kRankTolerance)) {
    throw Error(ErrorKind::DegenerateMatrix,
                "matrix is rank-deficient (smallest singular value " + std::to_string(f.s.back()) + ")");
  }
  return f.u * f.v.transposed();
}

inline Matrix random_orthogonal(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorKind::InvalidDimension, "dimension must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) g(i, j) = normal(rng);
  return nearest_orthogonal(g);
}

/// Right singular system of a tall (rows ≥ cols) matrix: singular values and
/// V, computed as the SVD of the R factor of a Householder QR so the data
/// matrix is never squared.
struct RightSingular {
  std::vector<double> s;
  Matrix v;
};

/// Minimum-norm least-squares solution of X·w ≈ y.
struct LeastSquaresSolution {
  std::vector<double> w;
  std::size_t rank = 0;
};

namespace detail {

// Householder QR of X (n×p, n ≥ p) carried out on column-major storage;
// applies the same reflectors to `rhs` when given. Returns R (p×p).
inline Matrix householder_r(const Matrix& x, std::vector<double>* rhs) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) cols[j][i] = x(i, j);

  std::vector<double> v(n);
  for (std::size_t k = 0; k < std::min(p, n); ++k) {
    auto& ck = cols[k];
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += ck[i] * ck[i];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = ck[k] > 0 ? -norm : norm;
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = k; i < n; ++i) v[i] = ck[i];
    v[k] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    auto reflect = [&](std::vector<double>& col) {
      double d = 0.0;
      for (std::size_t i = k; i < n; ++i) d += v[i] * col[i];
      const double f = 2.0 * d / vnorm2;
      for (std::size_t i = k; i < n; ++i) col[i] -= f * v[i];
    };
    for (std::size_t j = k; j < p; ++j) reflect(cols[j]);
    if (rhs != nullptr) reflect(*rhs);
  }

  Matrix r(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) r(i, j) = i < n ? cols[j][i] : 0.0;
  return r;
}

inline Matrix pad_rows(const Matrix& x, std::size_t rows) {
  if (x.rows() >= rows) return x;
  Matrix padded(rows, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) padded(i, j) = x(i, j);
  return padded;
}

}  // namespace detail

inline RightSingular right_singular(const Matrix& x) {
  if (!x.all_finite()) throw Error(ErrorKind::InvalidMatrix, "non-finite entries");
  const Matrix tall = detail::pad_rows(x, x.cols());
  SvdResult f = svd(detail::householder_r(tall, nullptr));
  return {std::move(f.s), std::move(f.v)};
}

inline LeastSquaresSolution least_squares(const Matrix& x, std::span<const double> y) {
  if (x.rows() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "design has " + std::to_string(x.rows()) +
                                                  " rows, target has " + std::to_string(y.size()));
  }
  const std::size_t p = x.cols();
  const Matrix tall = detail::pad_rows(x, p);
  std::vector<double> rhs(y.begin(), y.end());
  rhs.resize(tall.rows(), 0.0);
  const SvdResult f = svd(detail::householder_r(tall, &rhs));

  // w = V S⁺ Uᵀ c over the numerically non-zero singular values.
  const double cut = f.s.front() * static_cast<double>(std::max(tall.rows(), p)) *
                     std::numeric_limits<double>::epsilon();
  LeastSquaresSolution out{std::vector<double>(p, 0.0), 0};
  for (std::size_t k = 0; k < p; ++k) {
    if (!(f.s[k] > cut) || f.s[k] == 0.0) continue;
    ++out.rank;
    double coef = 0.0;
    for (std::size_t i = 0; i < p; ++i) coef += f.u(i, k) * rhs[i];
    coef /= f.s[k];
    for (std::size_t j = 0; j < p; ++j) out.w[j] += coef * f.v(j, k);
  }
  return out;
}

}  // namespace ultradense
