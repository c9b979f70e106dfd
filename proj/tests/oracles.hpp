#pragma once

// Brute-force references shared by the unit tests and the acceptance run.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdlib>
#include <vector>

namespace c2st::oracle {

struct BruteGaps {
  std::int64_t plus = 0;   // max over x of n*m*(F_P - F_Q)
  std::int64_t minus = 0;  // max over x of n*m*(F_Q - F_P)
};

/// Evaluates both empirical cdfs directly at every pooled point.
inline BruteGaps brute_gaps(const std::vector<double>& p, const std::vector<double>& q) {
  const auto n = static_cast<std::int64_t>(p.size());
  const auto m = static_cast<std::int64_t>(q.size());
  BruteGaps g;
  std::vector<double> grid = p;
  grid.insert(grid.end(), q.begin(), q.end());
  for (double x : grid) {
    std::int64_t fp = 0;
    std::int64_t fq = 0;
    for (double v : p) fp += v <= x ? 1 : 0;
    for (double v : q) fq += v <= x ? 1 : 0;
    const std::int64_t diff = fp * m - fq * n;
    g.plus = std::max(g.plus, diff);
    g.minus = std::max(g.minus, -diff);
  }
  return g;
}

/// Twice the number of pairs (x, y) with x > y, ties counted one half.
inline std::int64_t brute_twice_u(const std::vector<double>& p, const std::vector<double>& q) {
  std::int64_t twice = 0;
  for (double x : p) {
    for (double y : q) twice += x > y ? 2 : (x == y ? 1 : 0);
  }
  return twice;
}

enum class Stat { Ks, Kuiper, Wmw };

/// Permutation p-value by enumerating every assignment of the pooled values
/// to a first group of size n.
inline double brute_permutation_pvalue(const std::vector<double>& p, const std::vector<double>& q, Stat s) {
  std::vector<double> pooled = p;
  pooled.insert(pooled.end(), q.begin(), q.end());
  const std::size_t total = pooled.size();
  const auto n = p.size();
  const auto nm = static_cast<std::int64_t>(p.size() * q.size());
  const auto stat = [&](const std::vector<double>& a, const std::vector<double>& b) -> std::int64_t {
    if (s == Stat::Wmw) return std::abs(brute_twice_u(a, b) - nm);
    const auto g = brute_gaps(a, b);
    return s == Stat::Ks ? std::max(g.plus, g.minus) : g.plus + g.minus;
  };
  const std::int64_t observed = stat(p, q);
  std::size_t hits = 0;
  std::size_t count = 0;
  for (std::uint32_t mask = 0; mask < (1u << total); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != n) continue;
    std::vector<double> a;
    std::vector<double> b;
    for (std::size_t i = 0; i < total; ++i) ((mask >> i) & 1u ? a : b).push_back(pooled[i]);
    ++count;
    hits += stat(a, b) >= observed ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(count);
}

}  // namespace c2st::oracle
