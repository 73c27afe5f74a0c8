#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace desal {

/// Dense row-major 2-D array of doubles. Rows are samples.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix ones(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, 1.0); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool all_finite() const noexcept;
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class ElementOp { add, sub, mul };

/// Matrix product; throws ShapeError unless a.cols() == b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * b^T without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Element-by-element op. b may be a 1 x cols row, which is broadcast over a's rows.
Matrix elementwise(ElementOp op, const Matrix& a, const Matrix& b);
inline Matrix add(const Matrix& a, const Matrix& b) { return elementwise(ElementOp::add, a, b); }
inline Matrix sub(const Matrix& a, const Matrix& b) { return elementwise(ElementOp::sub, a, b); }
inline Matrix mul(const Matrix& a, const Matrix& b) { return elementwise(ElementOp::mul, a, b); }

Matrix transpose(const Matrix& a);
Matrix scale(const Matrix& a, double s);
/// 1 x cols vector of column sums.
Matrix column_sums(const Matrix& a);
Matrix column_means(const Matrix& a);
/// New matrix holding the listed rows of a, in order.
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> idx);
/// Columns [begin, end) of a.
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end);
/// Side-by-side concatenation; row counts must agree.
Matrix hconcat(const Matrix& a, const Matrix& b);

double sum(const Matrix& a);
double squared_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Seeded pseudo-random source.
///
/// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniform, normal and index draws are derived here rather than
/// through <random> distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller. Each pair of uniforms yields two draws;
  /// the second is handed out by the next call.
  double normal();
  /// Uniform integer in [0, n); n > 0.
  std::size_t index(std::size_t n);
  /// Child generator whose seed is drawn from this stream.
  Rng split() { return Rng(next_u64()); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// rows x cols matrix of i.i.d. N(0, sigma^2) draws; throws ParamError for sigma < 0.
Matrix randn(Rng& rng, std::size_t rows, std::size_t cols, double sigma);

}  // namespace desal
