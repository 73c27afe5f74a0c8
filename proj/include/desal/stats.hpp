#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "desal/tensor.hpp"

namespace desal {

/// r x c table of non-negative counts.
struct ContingencyTable {
  Matrix counts;

  /// Throws ValueError for negative or non-finite entries, DegenerateError
  /// for an empty table or an all-zero row or column.
  void validate() const;
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
  std::size_t dof = 0;
  std::size_t n_permutations = 0;
  bool exhaustive = false;
  /// Set when some expected cell count is below 5 (chi-square approximation is rough).
  bool low_expected_counts = false;
};

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed directly
/// so small tails keep full relative precision.
double gamma_q(double a, double x);
/// Upper tail probability of the chi-square distribution with dof degrees of freedom.
double chi_square_sf(double statistic, double dof);

/// Pearson test of independence; no continuity correction.
TestResult chi_square_independence(const ContingencyTable& table);

/// One-sided paired sign-flip test of H1 "b is more often correct than a".
///
/// The statistic is the mean of d_i = b_i - a_i. For n <= 20 every one of the
/// 2^n sign patterns is enumerated and p is the exact fraction whose mean is
/// >= the observed one. Larger inputs draw n_perm random patterns and report
/// (1 + hits) / (1 + n_perm).
TestResult permutation_test(std::span<const int> correct_a, std::span<const int> correct_b,
                            std::size_t n_perm, Rng& rng);
/// The two paths of permutation_test, callable for any n.
TestResult permutation_test_exact(std::span<const int> correct_a, std::span<const int> correct_b);
TestResult permutation_test_monte_carlo(std::span<const int> correct_a, std::span<const int> correct_b,
                                        std::size_t n_perm, Rng& rng);

/// Mean pairwise distance between cluster centroids divided by the mean
/// distance of each point to its own centroid.
double cluster_ratio(const Matrix& points, std::span<const std::size_t> cluster_ids);

double accuracy(std::span<const int> pred, std::span<const int> truth);

}  // namespace desal
