#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"

#include "desal/error.hpp"
#include "desal/tensor.hpp"

using namespace desal;

namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

}  // namespace

TEST_CASE("matmul agrees with the triple-loop definition") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 1 + rng.index(7), k = 1 + rng.index(7), m = 1 + rng.index(7);
    const Matrix a = fixtures::random_matrix(rng, n, k);
    const Matrix b = fixtures::random_matrix(rng, k, m);
    const Matrix ref = naive_matmul(a, b);
    CHECK(max_abs_diff(matmul(a, b), ref) < 1e-12);
    CHECK(max_abs_diff(matmul_tn(transpose(a), b), ref) < 1e-12);
    CHECK(max_abs_diff(matmul_nt(a, transpose(b)), ref) < 1e-12);
  }
}

TEST_CASE("matmul hand example and identity") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5, 6}, {7, 8}};
  CHECK(matmul(a, b) == Matrix{{19, 22}, {43, 50}});
  CHECK(matmul(a, Matrix::identity(2)) == a);
}

TEST_CASE("shape mismatches throw ShapeError") {
  const Matrix a(2, 3), b(2, 3);
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(matmul_tn(a, Matrix(3, 1)), ShapeError);
  CHECK_THROWS_AS(matmul_nt(a, Matrix(2, 2)), ShapeError);
  CHECK_THROWS_AS(add(a, Matrix(3, 3)), ShapeError);
  CHECK_THROWS_AS(hconcat(a, Matrix(3, 1)), ShapeError);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST_CASE("elementwise ops broadcast a single row") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix row{{10, 20}};
  CHECK(add(a, row) == Matrix{{11, 22}, {13, 24}});
  CHECK(sub(a, a) == Matrix(2, 2));
  CHECK(mul(a, a) == Matrix{{1, 4}, {9, 16}});
}

TEST_CASE("reductions and slicing") {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  CHECK(column_sums(a) == Matrix{{5, 7, 9}});
  CHECK(column_means(a) == Matrix{{2.5, 3.5, 4.5}});
  CHECK(sum(a) == 21.0);
  CHECK(squared_norm(a) == 91.0);
  CHECK(slice_cols(a, 1, 3) == Matrix{{2, 3}, {5, 6}});
  CHECK(hconcat(slice_cols(a, 0, 1), slice_cols(a, 1, 3)) == a);
  const std::vector<std::size_t> idx{1, 1, 0};
  CHECK(gather_rows(a, idx) == Matrix{{4, 5, 6}, {4, 5, 6}, {1, 2, 3}});
  const std::vector<std::size_t> bad{2};
  CHECK_THROWS_AS(gather_rows(a, bad), RangeError);
  CHECK(transpose(a) == Matrix{{1, 4}, {2, 5}, {3, 6}});
  CHECK(scale(a, 2.0)(1, 2) == 12.0);
}

TEST_CASE("all_finite detects NaN and infinity") {
  Matrix a(2, 2, 1.0);
  CHECK(a.all_finite());
  a(1, 1) = std::nan("");
  CHECK_FALSE(a.all_finite());
  a(1, 1) = INFINITY;
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("equal seeds give equal streams; split streams differ") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  Rng child = c.split();
  Rng d(42);
  CHECK(child.next_u64() != d.next_u64());
}

TEST_CASE("uniform lies in [0, 1) and normal has unit moments") {
  Rng rng(3);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("index stays in range and covers it") {
  Rng rng(5);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[rng.index(7)];
  for (int h : hits) CHECK(h > 800);
  CHECK_THROWS_AS(rng.index(0), ParamError);
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(9);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(w);
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}

TEST_CASE("randn scale, zero sigma and negative sigma") {
  Rng rng(1);
  const Matrix z = randn(rng, 3, 4, 0.0);
  CHECK(z == Matrix(3, 4));
  CHECK_THROWS_AS(randn(rng, 2, 2, -1.0), ParamError);
  CHECK_THROWS_AS(randn(rng, 2, 2, NAN), ParamError);
  const Matrix big = randn(rng, 20000, 1, 3.0);
  CHECK(std::abs(std::sqrt(squared_norm(big) / 20000.0) - 3.0) < 0.06);
}
