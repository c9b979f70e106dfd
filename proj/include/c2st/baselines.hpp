#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2st/numerics.hpp"
#include "c2st/outcome.hpp"
#include "c2st/rng.hpp"
#include "c2st/sample.hpp"

namespace c2st {

// ---------------------------------------------------------------------------
// Asymptotic tails

/// Kolmogorov survival function Q(lambda) = P(K > lambda).
inline double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-theta form, fast for small lambda.
    const double a = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double term = std::exp(-static_cast<double>((2 * k - 1) * (2 * k - 1)) * a);
      cdf += term;
      if (term < 1e-16 * cdf) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-12) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Kuiper survival function Q(lambda) = 2 sum (4 k^2 lambda^2 - 1) exp(-2 k^2 lambda^2).
inline double kuiper_sf(double lambda) {
  if (lambda < 0.4) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double k2l2 = static_cast<double>(k * k) * lambda * lambda;
    const double decay = std::exp(-2.0 * k2l2);
    sum += (4.0 * k2l2 - 1.0) * decay;
    if ((4.0 * k2l2 + 1.0) * decay < 1e-12) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Rank machinery on the pooled, sorted sample

/// Pooled sample sorted by value; `first[i]` tells whether sorted element i
/// came from the first sample. Ties keep the two groups adjacent.
struct PooledOrder {
  std::vector<double> values;
  std::vector<bool> first;
  std::size_t n = 0;  // size of first sample
  std::size_t m = 0;  // size of second sample

  bool has_ties() const {
    for (std::size_t i = 1; i < values.size(); ++i) {
      if (values[i] == values[i - 1]) return true;
    }
    return false;
  }
};

inline PooledOrder pool_and_sort(std::span<const double> a, std::span<const double> b) {
  std::vector<std::pair<double, bool>> both;
  both.reserve(a.size() + b.size());
  for (double v : a) both.emplace_back(v, true);
  for (double v : b) both.emplace_back(v, false);
  std::sort(both.begin(), both.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  PooledOrder p;
  p.n = a.size();
  p.m = b.size();
  p.values.reserve(both.size());
  p.first.reserve(both.size());
  for (const auto& [v, f] : both) {
    p.values.push_back(v);
    p.first.push_back(f);
  }
  return p;
}

/// Integer numerators of the signed ECDF gaps, scaled by n*m:
///   plus  = max_x n m (F_P(x) - F_Q(x)),  minus = max_x n m (F_Q(x) - F_P(x)).
/// ECDFs are compared only after every tied value has been absorbed.
struct EcdfGaps {
  std::int64_t plus = 0;
  std::int64_t minus = 0;
};

inline EcdfGaps ecdf_gaps(std::span<const double> values, const std::vector<bool>& first,
                          std::size_t n, std::size_t m) {
  EcdfGaps g;
  std::int64_t i = 0;
  std::int64_t j = 0;
  const auto nn = static_cast<std::int64_t>(n);
  const auto mm = static_cast<std::int64_t>(m);
  for (std::size_t k = 0; k < values.size(); ++k) {
    (first[k] ? i : j) += 1;
    if (k + 1 < values.size() && values[k + 1] == values[k]) continue;
    const std::int64_t diff = i * mm - j * nn;
    g.plus = std::max(g.plus, diff);
    g.minus = std::max(g.minus, -diff);
  }
  return g;
}

/// Twice the Mann-Whitney U of the first sample (midranks for ties), so
/// the result is always an integer.
inline std::int64_t twice_u_first(std::span<const double> values,
                                  const std::vector<bool>& first) {
  std::int64_t twice_u = 0;
  std::int64_t second_below = 0;
  std::size_t k = 0;
  while (k < values.size()) {
    std::size_t end = k;
    std::int64_t group_first = 0;
    std::int64_t group_second = 0;
    while (end < values.size() && values[end] == values[k]) {
      (first[end] ? group_first : group_second) += 1;
      ++end;
    }
    twice_u += group_first * (2 * second_below + group_second);
    second_below += group_second;
    k = end;
  }
  return twice_u;
}

/// Visits every assignment of n of the N pooled positions to the first
/// sample (N <= kEnumerationLimit).
inline void for_each_split(std::size_t total, std::size_t n,
                           const std::function<void(const std::vector<bool>&)>& visit) {
  std::vector<bool> mask(total, false);
  if (n == 0) {
    visit(mask);
    return;
  }
  std::uint64_t combo = (1ULL << n) - 1;
  const std::uint64_t limit = 1ULL << total;
  while (combo < limit) {
    for (std::size_t b = 0; b < total; ++b) mask[b] = (combo >> b) & 1ULL;
    visit(mask);
    // Gosper's hack: next integer with the same popcount.
    const std::uint64_t c = combo & (~combo + 1);
    const std::uint64_t r = combo + c;
    combo = (((r ^ combo) >> 2) / c) | r;
  }
}

inline double binomial_coefficient(std::size_t total, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * static_cast<double>(total - k + i) / static_cast<double>(i);
  }
  return c;
}

enum class TailMethod { Auto, Asymptotic, Exact };

/// Auto switches to the exact permutation null at or below this pooled size.
inline constexpr std::size_t kExactPooledLimit = 20;
inline constexpr std::size_t kEnumerationLimit = 26;

inline bool use_exact(TailMethod method, std::size_t n, std::size_t m) {
  if (method == TailMethod::Exact) return true;
  if (method == TailMethod::Asymptotic) return false;
  return n + m <= kExactPooledLimit;
}

inline void require_enumerable(std::size_t total, const char* who) {
  if (total > kEnumerationLimit) {
    throw std::invalid_argument(std::string(who) +
                                ": exact permutation null with ties needs n + m <= 26");
  }
}

/// Number of monotone lattice paths (0,0) -> (n,m) staying strictly inside
/// |i m - j n| < bound. Exact no-ties KS distribution.
inline double lattice_paths_inside(std::size_t n, std::size_t m, std::int64_t bound) {
  const auto nn = static_cast<std::int64_t>(n);
  const auto mm = static_cast<std::int64_t>(m);
  std::vector<double> row(m + 1, 0.0);
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= m; ++j) {
      const std::int64_t gap = static_cast<std::int64_t>(i) * mm - static_cast<std::int64_t>(j) * nn;
      if (std::abs(gap) >= bound) {
        row[j] = 0.0;
      } else if (i == 0 && j == 0) {
        row[j] = 1.0;
      } else {
        row[j] = (i > 0 ? row[j] : 0.0) + (j > 0 ? row[j - 1] : 0.0);
      }
    }
  }
  return row[m];
}

/// Counts of U = 0..n*m over all C(n+m, n) tie-free arrangements.
inline std::vector<double> mann_whitney_counts(std::size_t n, std::size_t m) {
  // table[i][j] holds the U-count vector for sizes (i, j).
  std::vector<std::vector<std::vector<double>>> table(
      n + 1, std::vector<std::vector<double>>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= m; ++j) {
      auto& cur = table[i][j];
      cur.assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        cur[0] = 1.0;
        continue;
      }
      // Largest element from the first sample beats all j of the second.
      const auto& a = table[i - 1][j];
      for (std::size_t u = 0; u < a.size(); ++u) cur[u + j] += a[u];
      const auto& b = table[i][j - 1];
      for (std::size_t u = 0; u < b.size(); ++u) cur[u] += b[u];
    }
  }
  return table[n][m];
}

// ---------------------------------------------------------------------------
// Tests

inline void require_univariate(const Sample& s_p, const Sample& s_q, const char* who) {
  if (s_p.cols() != 1 || s_q.cols() != 1) {
    throw ShapeError(std::string(who) + ": requires one-dimensional samples (got " +
                     std::to_string(s_p.cols()) + " and " + std::to_string(s_q.cols()) +
                     " columns)");
  }
  if (s_p.rows() == 0 || s_q.rows() == 0) {
    throw std::invalid_argument(std::string(who) + ": samples must be nonempty");
  }
}

/// Two-sample Kolmogorov-Smirnov: D = sup |F_P - F_Q| over the pooled points.
inline TestOutcome ks_test(const Sample& s_p, const Sample& s_q, double alpha,
                           TailMethod method = TailMethod::Auto) {
  require_univariate(s_p, s_q, "ks_test");
  const std::size_t n = s_p.rows();
  const std::size_t m = s_q.rows();
  const auto pooled = pool_and_sort(s_p.values(), s_q.values());
  const auto gaps = ecdf_gaps(pooled.values, pooled.first, n, m);
  const std::int64_t d_num = std::max(gaps.plus, gaps.minus);
  const double nm = static_cast<double>(n) * static_cast<double>(m);

  TestOutcome out;
  out.test = "ks";
  out.alpha = alpha;
  out.statistic = static_cast<double>(d_num) / nm;
  out.diagnostics["n"] = static_cast<double>(n);
  out.diagnostics["m"] = static_cast<double>(m);
  if (use_exact(method, n, m)) {
    out.diagnostics["exact"] = 1.0;
    const double total = binomial_coefficient(n + m, n);
    if (d_num == 0) {
      out.p_value = 1.0;
    } else if (!pooled.has_ties()) {
      out.p_value = 1.0 - lattice_paths_inside(n, m, d_num) / total;
    } else {
      require_enumerable(n + m, "ks_test");
      double hits = 0.0;
      for_each_split(n + m, n, [&](const std::vector<bool>& mask) {
        const auto g = ecdf_gaps(pooled.values, mask, n, m);
        hits += (std::max(g.plus, g.minus) >= d_num) ? 1.0 : 0.0;
      });
      out.p_value = hits / total;
    }
  } else {
    out.diagnostics["exact"] = 0.0;
    const double effective = nm / static_cast<double>(n + m);
    out.p_value = kolmogorov_sf(std::sqrt(effective) * out.statistic);
  }
  out.p_value = std::clamp(out.p_value, 0.0, 1.0);
  out.reject = decide(out.p_value, alpha);
  return out;
}

/// Kuiper: V = D+ + D-, asymptotic Kuiper tail (exact enumeration when
/// requested or for tiny pooled sizes).
inline TestOutcome kuiper_test(const Sample& s_p, const Sample& s_q, double alpha,
                               TailMethod method = TailMethod::Auto) {
  require_univariate(s_p, s_q, "kuiper_test");
  const std::size_t n = s_p.rows();
  const std::size_t m = s_q.rows();
  const auto pooled = pool_and_sort(s_p.values(), s_q.values());
  const auto gaps = ecdf_gaps(pooled.values, pooled.first, n, m);
  const std::int64_t v_num = gaps.plus + gaps.minus;
  const double nm = static_cast<double>(n) * static_cast<double>(m);

  TestOutcome out;
  out.test = "kuiper";
  out.alpha = alpha;
  out.statistic = static_cast<double>(v_num) / nm;
  out.diagnostics["d_plus"] = static_cast<double>(gaps.plus) / nm;
  out.diagnostics["d_minus"] = static_cast<double>(gaps.minus) / nm;
  if (use_exact(method, n, m)) {
    out.diagnostics["exact"] = 1.0;
    require_enumerable(n + m, "kuiper_test");
    double hits = 0.0;
    for_each_split(n + m, n, [&](const std::vector<bool>& mask) {
      const auto g = ecdf_gaps(pooled.values, mask, n, m);
      hits += (g.plus + g.minus >= v_num) ? 1.0 : 0.0;
    });
    out.p_value = hits / binomial_coefficient(n + m, n);
  } else {
    out.diagnostics["exact"] = 0.0;
    const double effective = nm / static_cast<double>(n + m);
    out.p_value = kuiper_sf(std::sqrt(effective) * out.statistic);
  }
  out.reject = decide(out.p_value, alpha);
  return out;
}

/// Wilcoxon-Mann-Whitney. Statistic is U of the first sample (pairs x > y,
/// ties count 1/2); two-sided p from the tie-corrected normal approximation.
inline TestOutcome wmw_test(const Sample& s_p, const Sample& s_q, double alpha,
                            TailMethod method = TailMethod::Auto) {
  require_univariate(s_p, s_q, "wmw_test");
  const std::size_t n = s_p.rows();
  const std::size_t m = s_q.rows();
  if (n < 2 || m < 2) throw std::invalid_argument("wmw_test: need n, m >= 2");
  const auto pooled = pool_and_sort(s_p.values(), s_q.values());
  const std::int64_t twice_u = twice_u_first(pooled.values, pooled.first);
  const auto nm = static_cast<std::int64_t>(n * m);

  const auto total_n = static_cast<double>(n + m);
  double tie_sum = 0.0;
  for (std::size_t k = 0; k < pooled.values.size();) {
    std::size_t end = k;
    while (end < pooled.values.size() && pooled.values[end] == pooled.values[k]) ++end;
    const auto t = static_cast<double>(end - k);
    tie_sum += t * t * t - t;
    k = end;
  }
  const double variance = static_cast<double>(nm) / 12.0 *
                          ((total_n + 1.0) - tie_sum / (total_n * (total_n - 1.0)));
  if (!(variance > 0.0)) {
    throw DegenerateDataError("wmw_test: all pooled values are identical");
  }

  TestOutcome out;
  out.test = "wmw";
  out.alpha = alpha;
  out.statistic = 0.5 * static_cast<double>(twice_u);
  out.diagnostics["u_second"] = static_cast<double>(nm) - out.statistic;
  const std::int64_t observed_gap = std::abs(twice_u - nm);
  if (use_exact(method, n, m)) {
    out.diagnostics["exact"] = 1.0;
    const double total = binomial_coefficient(n + m, n);
    double hits = 0.0;
    if (!pooled.has_ties()) {
      const auto counts = mann_whitney_counts(n, m);
      for (std::size_t u = 0; u < counts.size(); ++u) {
        if (std::abs(2 * static_cast<std::int64_t>(u) - nm) >= observed_gap) hits += counts[u];
      }
    } else {
      require_enumerable(n + m, "wmw_test");
      for_each_split(n + m, n, [&](const std::vector<bool>& mask) {
        if (std::abs(twice_u_first(pooled.values, mask) - nm) >= observed_gap) hits += 1.0;
      });
    }
    out.p_value = std::min(1.0, hits / total);
  } else {
    out.diagnostics["exact"] = 0.0;
    const double z = (out.statistic - 0.5 * static_cast<double>(nm)) / std::sqrt(variance);
    out.diagnostics["z"] = z;
    out.p_value = std::min(1.0, 2.0 * normal_sf(std::abs(z)));
  }
  out.reject = decide(out.p_value, alpha);
  return out;
}

/// One-sample KS distance between the empirical cdf of `values` and `cdf`,
/// with asymptotic p-value Q(sqrt(n) D).
inline TestOutcome ks_one_sample(std::span<const double> values,
                                 const std::function<double(double)>& cdf, double alpha) {
  if (values.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  TestOutcome out;
  out.test = "ks-one-sample";
  out.alpha = alpha;
  out.statistic = d;
  out.p_value = kolmogorov_sf(std::sqrt(n) * d);
  out.reject = decide(out.p_value, alpha);
  return out;
}

// ---------------------------------------------------------------------------
// Linear-time MMD

/// Gaussian kernel bandwidth; empty means the median heuristic.
struct KernelConfig {
  std::optional<double> bandwidth;
};

inline constexpr std::size_t kMedianHeuristicRows = 500;

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

/// Median pairwise Euclidean distance over the pooled rows, using at most
/// kMedianHeuristicRows leading rows of each sample.
inline double median_heuristic(const Sample& a, const Sample& b) {
  std::vector<std::span<const double>> rows;
  for (std::size_t i = 0; i < std::min(a.rows(), kMedianHeuristicRows); ++i) rows.push_back(a.row(i));
  for (std::size_t i = 0; i < std::min(b.rows(), kMedianHeuristicRows); ++i) rows.push_back(b.row(i));
  std::vector<double> dist;
  dist.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      dist.push_back(std::sqrt(squared_distance(rows[i], rows[j])));
    }
  }
  if (dist.empty()) return 1.0;
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  if (*mid > 0.0) return *mid;
  const double largest = *std::max_element(dist.begin(), dist.end());
  return largest > 0.0 ? largest : 1.0;
}

/// Linear-time MMD with a Gaussian kernel.
///
/// Rows are paired after one shared seeded permutation of the row indices
/// (the same permutation is applied to both samples); an odd trailing row is
/// dropped. The statistic is the mean of
///   h = k(x_a, x_b) + k(y_a, y_b) - k(x_a, y_b) - k(x_b, y_a)
/// over consecutive pairs, with a one-sided Gaussian p-value from the
/// empirical variance of the h terms.
inline TestOutcome mmd_linear_test(const Rng& rng, const Sample& s_p, const Sample& s_q,
                                   const KernelConfig& kernel, double alpha) {
  if (s_p.cols() != s_q.cols()) throw ShapeError("mmd_linear_test: dimension mismatch");
  if (s_p.rows() != s_q.rows()) throw ShapeError("mmd_linear_test: samples must have equal sizes");
  if (s_p.rows() < 4) throw std::invalid_argument("mmd_linear_test: need n >= 4");
  if (kernel.bandwidth && !(*kernel.bandwidth > 0.0)) {
    throw std::invalid_argument("mmd_linear_test: bandwidth must be positive");
  }
  Rng shuffle_rng = rng.child(0);
  const auto order = shuffle_rng.permutation(s_p.rows());
  const Sample x = s_p.select_rows(order);
  const Sample y = s_q.select_rows(order);
  const std::size_t pairs = s_p.rows() / 2;

  const double sigma = kernel.bandwidth.value_or(median_heuristic(x, y));
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  const auto k = [&](std::span<const double> a, std::span<const double> b) {
    return std::exp(-squared_distance(a, b) * inv_two_sigma2);
  };

  std::vector<double> h(pairs);
  double mean = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto xa = x.row(2 * i);
    const auto xb = x.row(2 * i + 1);
    const auto ya = y.row(2 * i);
    const auto yb = y.row(2 * i + 1);
    h[i] = k(xa, xb) + k(ya, yb) - k(xa, yb) - k(xb, ya);
    mean += h[i];
  }
  mean /= static_cast<double>(pairs);
  double ss = 0.0;
  for (double v : h) ss += (v - mean) * (v - mean);
  const double var_h = pairs > 1 ? ss / static_cast<double>(pairs - 1) : 0.0;

  TestOutcome out;
  out.test = "mmd";
  out.alpha = alpha;
  out.statistic = mean;
  out.diagnostics["bandwidth"] = sigma;
  out.diagnostics["pairs"] = static_cast<double>(pairs);
  out.diagnostics["variance_h"] = var_h;
  if (!(var_h > 0.0)) {
    if (mean <= 0.0) {
      out.p_value = 1.0;
    } else {
      throw DegenerateDataError("mmd_linear_test: zero variance with positive statistic");
    }
  } else {
    out.p_value = normal_sf(mean / std::sqrt(var_h / static_cast<double>(pairs)));
  }
  out.reject = decide(out.p_value, alpha);
  return out;
}

}  // namespace c2st
