#include "desal/stats.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "desal/error.hpp"

namespace desal {

namespace {

constexpr int kMaxGammaIterations = 100000;
constexpr double kGammaEps = 1e-16;

// Series expansion of P(a, x); converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double total = term;
  for (int n = 1; n < kMaxGammaIterations; ++n) {
    term *= x / (a + n);
    total += term;
    if (std::abs(term) < std::abs(total) * kGammaEps) break;
  }
  return total * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) by the modified Lentz method; for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxGammaIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void check_gamma_args(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a))
    throw ParamError("incomplete gamma requires a > 0 and x >= 0");
}

void check_binary(std::span<const int> v, const char* what) {
  for (int x : v)
    if (x != 0 && x != 1) throw ValueError(std::string(what) + " entries must be 0 or 1", 0);
}

}  // namespace

double gamma_p(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_fraction(a, x);
}

double chi_square_sf(double statistic, double dof) {
  if (!(dof > 0.0)) throw ParamError("chi-square needs dof > 0");
  if (statistic <= 0.0) return 1.0;
  return gamma_q(0.5 * dof, 0.5 * statistic);
}

void ContingencyTable::validate() const {
  if (counts.rows() == 0 || counts.cols() == 0) throw DegenerateError("contingency table is empty");
  for (double v : counts.data())
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValueError("contingency counts must be finite and >= 0", 0);
  Matrix row_tot = column_sums(transpose(counts));
  Matrix col_tot = column_sums(counts);
  for (std::size_t i = 0; i < counts.rows(); ++i)
    if (row_tot(0, i) == 0.0) throw DegenerateError("row " + std::to_string(i) + " of the table is all zero");
  for (std::size_t j = 0; j < counts.cols(); ++j)
    if (col_tot(0, j) == 0.0) throw DegenerateError("column " + std::to_string(j) + " of the table is all zero");
}

TestResult chi_square_independence(const ContingencyTable& table) {
  table.validate();
  const Matrix& o = table.counts;
  const std::size_t r = o.rows();
  const std::size_t c = o.cols();
  std::vector<double> row_tot(r, 0.0), col_tot(c, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      row_tot[i] += o(i, j);
      col_tot[j] += o(i, j);
      total += o(i, j);
    }

  TestResult res;
  res.method = "chi_square_independence";
  res.dof = (r - 1) * (c - 1);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double e = row_tot[i] * col_tot[j] / total;
      if (e < 5.0) res.low_expected_counts = true;
      const double diff = o(i, j) - e;
      res.statistic += diff * diff / e;
    }
  // A 1 x c or r x 1 table has no degrees of freedom: nothing can depart from independence.
  res.p_value = res.dof == 0 ? 1.0 : chi_square_sf(res.statistic, static_cast<double>(res.dof));
  return res;
}

namespace {

// Nonzero paired differences b_i - a_i and their sum.
struct PairedDiffs {
  std::vector<int> nonzero;
  long observed = 0;
  std::size_t n = 0;
};

PairedDiffs paired_diffs(std::span<const int> correct_a, std::span<const int> correct_b) {
  if (correct_a.size() != correct_b.size())
    throw ShapeError("permutation_test: lengths " + std::to_string(correct_a.size()) + " and " +
                     std::to_string(correct_b.size()) + " differ");
  if (correct_a.empty()) throw ShapeError("permutation_test needs at least one pair");
  check_binary(correct_a, "correct_a");
  check_binary(correct_b, "correct_b");
  PairedDiffs out;
  out.n = correct_a.size();
  // Zero differences are unchanged by a sign flip; only the nonzero ones matter.
  for (std::size_t i = 0; i < out.n; ++i) {
    const int di = correct_b[i] - correct_a[i];
    out.observed += di;
    if (di != 0) out.nonzero.push_back(di);
  }
  return out;
}

TestResult paired_result(const PairedDiffs& d) {
  TestResult res;
  res.method = "paired_sign_flip";
  res.statistic = static_cast<double>(d.observed) / static_cast<double>(d.n);
  return res;
}

}  // namespace

TestResult permutation_test_exact(std::span<const int> correct_a, std::span<const int> correct_b) {
  const PairedDiffs d = paired_diffs(correct_a, correct_b);
  if (d.nonzero.size() > 62) throw ParamError("permutation_test_exact: too many nonzero differences to enumerate");
  TestResult res = paired_result(d);
  const std::uint64_t patterns = std::uint64_t{1} << d.nonzero.size();
  std::uint64_t hits = 0;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    long s = 0;
    for (std::size_t i = 0; i < d.nonzero.size(); ++i) s += (mask >> i) & 1U ? -d.nonzero[i] : d.nonzero[i];
    if (s >= d.observed) ++hits;
  }
  res.exhaustive = true;
  res.n_permutations = d.n < 64 ? std::size_t{1} << d.n : patterns;
  res.p_value = static_cast<double>(hits) / static_cast<double>(patterns);
  return res;
}

TestResult permutation_test_monte_carlo(std::span<const int> correct_a, std::span<const int> correct_b,
                                        std::size_t n_perm, Rng& rng) {
  const PairedDiffs d = paired_diffs(correct_a, correct_b);
  if (n_perm == 0) throw ParamError("permutation_test: Monte-Carlo path needs n_perm >= 1");
  TestResult res = paired_result(d);
  std::uint64_t hits = 0;
  for (std::size_t k = 0; k < n_perm; ++k) {
    long s = 0;
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < d.nonzero.size(); ++i) {
      if (i % 64 == 0) bits = rng.next_u64();
      s += bits & 1U ? -d.nonzero[i] : d.nonzero[i];
      bits >>= 1;
    }
    if (s >= d.observed) ++hits;
  }
  res.n_permutations = n_perm;
  res.p_value = static_cast<double>(1 + hits) / static_cast<double>(1 + n_perm);
  return res;
}

TestResult permutation_test(std::span<const int> correct_a, std::span<const int> correct_b,
                            std::size_t n_perm, Rng& rng) {
  if (correct_a.size() <= 20 && correct_a.size() == correct_b.size())
    return permutation_test_exact(correct_a, correct_b);
  return permutation_test_monte_carlo(correct_a, correct_b, n_perm, rng);
}

double cluster_ratio(const Matrix& points, std::span<const std::size_t> cluster_ids) {
  if (points.rows() != cluster_ids.size())
    throw ShapeError("cluster_ratio: " + std::to_string(points.rows()) + " points but " +
                     std::to_string(cluster_ids.size()) + " cluster ids");
  std::map<std::size_t, std::size_t> slot;
  for (std::size_t id : cluster_ids) slot.try_emplace(id, slot.size());
  const std::size_t k = slot.size();
  if (k < 2) throw DegenerateError("cluster_ratio needs at least two clusters");

  const std::size_t dim = points.cols();
  Matrix centroids(k, dim);
  std::vector<double> counts(k, 0.0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const std::size_t s = slot[cluster_ids[i]];
    counts[s] += 1.0;
    auto c = centroids.row(s);
    auto p = points.row(i);
    for (std::size_t j = 0; j < dim; ++j) c[j] += p[j];
  }
  for (std::size_t s = 0; s < k; ++s)
    for (double& v : centroids.row(s)) v /= counts[s];

  auto dist = [dim](std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(acc);
  };

  double intra = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) intra += dist(points.row(i), centroids.row(slot[cluster_ids[i]]));
  intra /= static_cast<double>(points.rows());

  double inter = 0.0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) inter += dist(centroids.row(a), centroids.row(b));
  inter /= static_cast<double>(k * (k - 1) / 2);

  if (intra < 1e-12) throw DegenerateError("cluster_ratio: mean intra-cluster distance is zero");
  return inter / intra;
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size())
    throw ShapeError("accuracy: lengths " + std::to_string(pred.size()) + " and " +
                     std::to_string(truth.size()) + " differ");
  if (pred.empty()) throw ShapeError("accuracy of an empty sequence");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace desal
