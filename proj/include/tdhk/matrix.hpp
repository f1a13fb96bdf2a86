#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <initializer_list>
#include <string>
#include <vector>

#include "tdhk/errors.hpp"

namespace tdhk {

// Dense 2-D real matrix, row-major. Small and value-semantic; this is the
// substrate of all network and curvature math. Batches are plain matrices
// (batch x features), there is no tensor type.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows = static_cast<int>(init.size());
    cols = rows > 0 ? static_cast<int>(init.begin()->size()) : 0;
    data.reserve(static_cast<size_t>(rows) * cols);
    for (const auto& row : init) {
      if (static_cast<int>(row.size()) != cols)
        throw ShapeError("matrix initializer rows have unequal lengths");
      data.insert(data.end(), row.begin(), row.end());
    }
  }

  static Matrix zeros(int r, int c) { return Matrix(r, c); }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }

  Matrix transposed() const {
    Matrix t(cols, rows);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data) s += v * v;
    return std::sqrt(s);
  }
};

namespace detail {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<EigenRowMajor> emap(Matrix& m) {
  return Eigen::Map<EigenRowMajor>(m.data.data(), m.rows, m.cols);
}

inline Eigen::Map<const EigenRowMajor> emap(const Matrix& m) {
  return Eigen::Map<const EigenRowMajor>(m.data.data(), m.rows, m.cols);
}

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

}  // namespace detail

inline bool is_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

inline void ensure_finite(const Matrix& m, const char* what) {
  if (!is_finite(m)) throw NumericError(std::string(what) + ": non-finite entries");
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ShapeError("max_abs_diff: " + detail::shape_str(a) + " vs " + detail::shape_str(b));
  double d = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
  return d;
}

// Standard matrix product.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: " + detail::shape_str(a) + " times " + detail::shape_str(b));
  Matrix out(a.rows, b.cols);
  detail::emap(out).noalias() = detail::emap(a) * detail::emap(b);
  ensure_finite(out, "matmul");
  return out;
}

// a * b^T without materializing the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw ShapeError("matmul_nt: " + detail::shape_str(a) + " times " + detail::shape_str(b) + "^T");
  Matrix out(a.rows, b.rows);
  detail::emap(out).noalias() = detail::emap(a) * detail::emap(b).transpose();
  ensure_finite(out, "matmul_nt");
  return out;
}

// a^T * b without materializing the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw ShapeError("matmul_tn: " + detail::shape_str(a) + "^T times " + detail::shape_str(b));
  Matrix out(a.cols, b.cols);
  detail::emap(out).noalias() = detail::emap(a).transpose() * detail::emap(b);
  ensure_finite(out, "matmul_tn");
  return out;
}

// Inverse of (m + jitter*I) for symmetric positive definite m, computed via
// eigendecomposition so the result is symmetric by construction. Throws
// CurvatureError when the damped matrix is not positive definite; the caller
// is expected to raise damping.
inline Matrix sym_inverse(const Matrix& m, double jitter) {
  if (m.rows != m.cols) throw ShapeError("sym_inverse: non-square " + detail::shape_str(m));
  if (jitter < 0.0) throw ConfigError("sym_inverse: negative jitter");
  const int n = m.rows;
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c)
      if (std::abs(m(r, c) - m(c, r)) > 1e-10)
        throw ShapeError("sym_inverse: input not symmetric at (" + std::to_string(r) + "," +
                         std::to_string(c) + ")");

  Eigen::MatrixXd damped = detail::emap(m);
  damped.diagonal().array() += jitter;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(damped);
  if (eig.info() != Eigen::Success)
    throw CurvatureError("sym_inverse: eigendecomposition failed");
  const Eigen::VectorXd& vals = eig.eigenvalues();
  if (vals.minCoeff() <= 0.0)
    throw CurvatureError("sym_inverse: matrix not positive definite after jitter (min eigenvalue " +
                         std::to_string(vals.minCoeff()) + ")");
  Eigen::MatrixXd inv =
      eig.eigenvectors() * vals.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  // Make symmetry exact rather than within round-off.
  inv = 0.5 * (inv + inv.transpose()).eval();

  Matrix out(n, n);
  detail::emap(out) = inv;
  ensure_finite(out, "sym_inverse");
  return out;
}

// Kronecker product. Used by the curvature test oracle, not the hot path.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows * b.rows, a.cols * b.cols);
  for (int ar = 0; ar < a.rows; ++ar)
    for (int ac = 0; ac < a.cols; ++ac) {
      const double v = a(ar, ac);
      for (int br = 0; br < b.rows; ++br)
        for (int bc = 0; bc < b.cols; ++bc)
          out(ar * b.rows + br, ac * b.cols + bc) = v * b(br, bc);
    }
  return out;
}

// Column-stacking vectorization. This convention is the binding contract
// between the factored preconditioner and its explicit-Kronecker oracle:
// vec(B*V*A^T) = (A kron B) vec(V).
inline Matrix vec(const Matrix& m) {
  Matrix out(m.rows * m.cols, 1);
  int k = 0;
  for (int c = 0; c < m.cols; ++c)
    for (int r = 0; r < m.rows; ++r) out(k++, 0) = m(r, c);
  return out;
}

inline Matrix unvec(const Matrix& v, int rows, int cols) {
  if (v.cols != 1 || v.rows != rows * cols)
    throw ShapeError("unvec: vector " + detail::shape_str(v) + " does not fill " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  Matrix out(rows, cols);
  int k = 0;
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) out(r, c) = v(k++, 0);
  return out;
}

}  // namespace tdhk
