#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "tdhk/matrix.hpp"

using namespace tdhk;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (double& v : m.data) v = dist(rng);
  return m;
}

Matrix random_spd(int n, std::mt19937_64& rng) {
  Matrix r = random_matrix(n, n, rng);
  Matrix spd = matmul_tn(r, r);  // R^T R is PSD
  for (int i = 0; i < n; ++i) spd(i, i) += 0.1;
  return spd;
}

// Independent oracle: naive triple loop, no shared code with matmul.
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

}  // namespace

TEST_CASE("matmul identity and analytic cases") {
  std::mt19937_64 rng(7);
  Matrix m = random_matrix(2, 3, rng);
  CHECK(max_abs_diff(matmul(Matrix::identity(2), m), m) == 0.0);

  Matrix a{{1, 2}, {3, 4}};
  Matrix b{{0}, {1}};
  Matrix expected{{2}, {4}};
  CHECK(max_abs_diff(matmul(a, b), expected) == 0.0);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  std::mt19937_64 rng(11);
  Matrix a = random_matrix(5, 4, rng);
  Matrix b = random_matrix(4, 3, rng);
  CHECK(max_abs_diff(matmul(a, b), matmul_oracle(a, b)) <= 1e-12);
}

TEST_CASE("matmul rejects mismatched shapes") {
  Matrix a(2, 3), b(2, 3);
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul associativity on random triples") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = random_matrix(4, 6, rng);
    Matrix b = random_matrix(6, 5, rng);
    Matrix c = random_matrix(5, 3, rng);
    Matrix left = matmul(matmul(a, b), c);
    Matrix right = matmul(a, matmul(b, c));
    CHECK(max_abs_diff(left, right) <= 1e-9 * std::max(1.0, left.frobenius_norm()));
  }
}

TEST_CASE("matmul transpose helpers agree with explicit transposes") {
  std::mt19937_64 rng(17);
  Matrix a = random_matrix(4, 5, rng);
  Matrix b = random_matrix(3, 5, rng);
  CHECK(max_abs_diff(matmul_nt(a, b), matmul(a, b.transposed())) <= 1e-13);
  Matrix c = random_matrix(4, 3, rng);
  CHECK(max_abs_diff(matmul_tn(a, c), matmul(a.transposed(), c)) <= 1e-13);
}

TEST_CASE("sym_inverse identity and diagonal cases") {
  CHECK(max_abs_diff(sym_inverse(Matrix::identity(3), 0.0), Matrix::identity(3)) <= 1e-14);

  Matrix d{{2, 0}, {0, 4}};
  Matrix expected{{0.5, 0}, {0, 0.25}};
  CHECK(max_abs_diff(sym_inverse(d, 0.0), expected) <= 1e-14);
}

TEST_CASE("sym_inverse multiply-back on random SPD matrices") {
  std::mt19937_64 rng(19);
  Matrix m = random_spd(6, rng);
  Matrix inv = sym_inverse(m, 0.0);
  CHECK(max_abs_diff(matmul(inv, m), Matrix::identity(6)) <= 1e-8);

  // Property: (m + jI)^-1 (m + jI) = I up to 32x32, with jitter.
  for (int n : {2, 8, 17, 32}) {
    Matrix s = random_spd(n, rng);
    const double jitter = 0.3;
    Matrix si = sym_inverse(s, jitter);
    Matrix damped = s;
    for (int i = 0; i < n; ++i) damped(i, i) += jitter;
    CHECK(max_abs_diff(matmul(si, damped), Matrix::identity(n)) <= 1e-8);
    // Result symmetric to tolerance.
    CHECK(max_abs_diff(si, si.transposed()) <= 1e-10);
  }
}

TEST_CASE("sym_inverse rejects non-PD and asymmetric inputs") {
  Matrix neg{{-1, 0}, {0, 1}};
  CHECK_THROWS_AS(sym_inverse(neg, 0.0), CurvatureError);
  // Sufficient jitter repairs it.
  CHECK_NOTHROW(sym_inverse(neg, 2.0));

  Matrix asym{{1, 0.5}, {0.2, 1}};
  CHECK_THROWS_AS(sym_inverse(asym, 0.0), ShapeError);
  Matrix rect(2, 3);
  CHECK_THROWS_AS(sym_inverse(rect, 0.0), ShapeError);
}

TEST_CASE("kron identity and definitional expansion") {
  CHECK(max_abs_diff(kron(Matrix::identity(2), Matrix::identity(2)), Matrix::identity(4)) == 0.0);

  Matrix a{{1, 2}};
  Matrix b{{3}, {4}};
  Matrix expected{{3, 6}, {4, 8}};
  CHECK(max_abs_diff(kron(a, b), expected) == 0.0);
}

TEST_CASE("kron mixed-product property") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a = random_matrix(3, 2, rng);
    Matrix b = random_matrix(2, 4, rng);
    Matrix x = random_matrix(2, 1, rng);
    Matrix y = random_matrix(4, 1, rng);
    Matrix lhs = matmul(kron(a, b), kron(x, y));
    Matrix rhs = kron(matmul(a, x), matmul(b, y));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
  }
}

TEST_CASE("vec is column-stacking and unvec inverts it") {
  Matrix m{{1, 2}, {3, 4}};
  Matrix v = vec(m);
  Matrix expected{{1}, {3}, {2}, {4}};
  CHECK(max_abs_diff(v, expected) == 0.0);

  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix r = random_matrix(3, 5, rng);
    CHECK(max_abs_diff(unvec(vec(r), 3, 5), r) == 0.0);
  }
  CHECK_THROWS_AS(unvec(v, 3, 3), ShapeError);
}

TEST_CASE("Kronecker-vec identity vec(B V A^T) = (A kron B) vec(V)") {
  // The binding contract between the factored preconditioner and its oracle.
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix b = random_matrix(2, 2, rng);
    Matrix v = random_matrix(2, 3, rng);
    Matrix a = random_matrix(3, 3, rng);
    Matrix lhs = vec(matmul(matmul(b, v), a.transposed()));
    Matrix rhs = matmul(kron(a, b), vec(v));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
  }
}
