#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "c2st/numerics.hpp"
#include "c2st/parallel.hpp"
#include "c2st/rng.hpp"
#include "c2st/sample.hpp"
#include "c2st/two_sample.hpp"

namespace c2st {

enum class Experiment { Type1, GaussStudent, Sinusoid };

inline std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::Type1: return "type1";
    case Experiment::GaussStudent: return "gauss-student";
    case Experiment::Sinusoid: return "sinusoid";
  }
  return "?";
}

inline std::optional<Experiment> parse_experiment(std::string_view name) {
  for (auto e : {Experiment::Type1, Experiment::GaussStudent, Experiment::Sinusoid}) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

/// One cell of a grid. Parameters an experiment does not use are ignored.
struct GridPoint {
  std::size_t n = 2000;
  double nu = 3.0;
  double delta = 1.0;
  double gamma = 0.25;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct TrialGrid {
  Experiment experiment = Experiment::Type1;
  std::vector<std::size_t> n_values;
  std::vector<double> nu_values;
  std::vector<double> delta_values;
  std::vector<double> gamma_values;
  /// Values held when another axis is swept.
  GridPoint fixed{};
  /// Cartesian product of all axes instead of one-axis-at-a-time sweeps.
  bool full_product = false;
  std::size_t trials = 100;
  std::uint64_t base_seed = 0;
  std::vector<TestKind> tests;
  double alpha = 0.05;
  /// Sinusoid only: pair each x with its own y, so both samples coincide.
  bool identity_permutation = false;
  /// 0 means one per hardware thread. Results do not depend on it.
  std::size_t workers = 0;
  TestSettings settings{};

  static TrialGrid defaults(Experiment e) {
    TrialGrid g;
    g.experiment = e;
    switch (e) {
      case Experiment::Type1:
        g.n_values = {25, 50, 100, 500, 1000, 5000, 10000};
        g.tests.assign(kAllTests.begin(), kAllTests.end());
        break;
      case Experiment::GaussStudent:
        g.n_values = {25, 50, 100, 500, 1000, 2000, 5000, 10000};
        g.nu_values = {1, 2, 3, 5, 10, 20};
        g.tests.assign(kAllTests.begin(), kAllTests.end());
        break;
      case Experiment::Sinusoid:
        g.n_values = {25, 50, 100, 500, 1000, 2000, 5000};
        g.delta_values = {0.5, 1, 2, 4, 8, 16};
        g.gamma_values = {0.25, 0.5, 1, 2, 4};
        g.tests = {TestKind::C2stNn, TestKind::C2stKnn, TestKind::Mmd};
        break;
    }
    return g;
  }
};

inline bool experiment_uses_nu(Experiment e) { return e == Experiment::GaussStudent; }
inline bool experiment_uses_sinusoid(Experiment e) { return e == Experiment::Sinusoid; }

inline void validate(const TrialGrid& g) {
  if (g.trials == 0) throw std::invalid_argument("grid: trials must be >= 1");
  if (g.tests.empty()) throw std::invalid_argument("grid: no tests selected");
  if (!(g.alpha >= 0.0 && g.alpha <= 1.0)) throw std::invalid_argument("grid: alpha must lie in [0, 1]");
  if (g.n_values.empty()) throw std::invalid_argument("grid: n list is empty");
  auto check_n = [](std::size_t n) {
    if (n < 4) throw std::invalid_argument("grid: every n must be >= 4 (got " + std::to_string(n) + ")");
  };
  check_n(g.fixed.n);
  for (auto n : g.n_values) check_n(n);
  if (experiment_uses_nu(g.experiment)) {
    if (g.nu_values.empty()) throw std::invalid_argument("grid: nu list is empty");
    for (double nu : g.nu_values) {
      if (!(nu > 0.0)) throw std::invalid_argument("grid: degrees of freedom must be > 0");
    }
    if (!(g.fixed.nu > 0.0)) throw std::invalid_argument("grid: degrees of freedom must be > 0");
  }
  if (experiment_uses_sinusoid(g.experiment)) {
    if (g.delta_values.empty() || g.gamma_values.empty()) {
      throw std::invalid_argument("grid: delta and gamma lists must be nonempty");
    }
    for (double d : g.delta_values) {
      if (!std::isfinite(d)) throw std::invalid_argument("grid: delta must be finite");
    }
    for (double gm : g.gamma_values) {
      if (!(gm >= 0.0) || !std::isfinite(gm)) throw std::invalid_argument("grid: gamma must be >= 0");
    }
    for (TestKind t : g.tests) {
      if (is_univariate_only(t)) {
        throw std::invalid_argument("grid: " + std::string(to_string(t)) +
                                    " cannot run on two-column sinusoid data");
      }
    }
  }
}

/// Cells in output order: each axis swept in turn around `fixed`, duplicates
/// dropped (or the full product when requested).
inline std::vector<GridPoint> grid_cells(const TrialGrid& g) {
  std::vector<GridPoint> cells;
  const auto add = [&cells](const GridPoint& p) {
    for (const auto& c : cells) {
      if (c == p) return;
    }
    cells.push_back(p);
  };
  const bool nu = experiment_uses_nu(g.experiment);
  const bool sin = experiment_uses_sinusoid(g.experiment);
  const std::vector<double> fixed_nu{g.fixed.nu};
  const std::vector<double> fixed_delta{g.fixed.delta};
  const std::vector<double> fixed_gamma{g.fixed.gamma};

  if (g.full_product || g.experiment == Experiment::Type1) {
    const auto& nus = nu ? g.nu_values : fixed_nu;
    const auto& deltas = sin ? g.delta_values : fixed_delta;
    const auto& gammas = sin ? g.gamma_values : fixed_gamma;
    for (auto n : g.n_values)
      for (double v : nus)
        for (double d : deltas)
          for (double gm : gammas) add({n, v, d, gm});
    return cells;
  }
  for (auto n : g.n_values) add({n, g.fixed.nu, g.fixed.delta, g.fixed.gamma});
  if (nu) {
    for (double v : g.nu_values) add({g.fixed.n, v, g.fixed.delta, g.fixed.gamma});
  }
  if (sin) {
    for (double d : g.delta_values) add({g.fixed.n, g.fixed.nu, d, g.fixed.gamma});
    for (double gm : g.gamma_values) add({g.fixed.n, g.fixed.nu, g.fixed.delta, gm});
  }
  return cells;
}

/// Seed of one trial: a hash of the base seed, the experiment, the cell
/// coordinates the experiment uses and the trial index.
inline std::uint64_t trial_seed(const TrialGrid& g, const GridPoint& p, std::size_t trial) {
  std::uint64_t h = derive_seed(g.base_seed, static_cast<std::uint64_t>(g.experiment));
  h = derive_seed(h, p.n);
  if (experiment_uses_nu(g.experiment)) h = derive_seed(h, std::bit_cast<std::uint64_t>(p.nu));
  if (experiment_uses_sinusoid(g.experiment)) {
    h = derive_seed(h, std::bit_cast<std::uint64_t>(p.delta));
    h = derive_seed(h, std::bit_cast<std::uint64_t>(p.gamma));
  }
  return derive_seed(h, trial);
}

struct TrialData {
  Sample a;
  Sample b;
};

/// Draws the two samples of one trial from child 0 of the trial stream.
inline TrialData draw_trial(const TrialGrid& g, const GridPoint& p, const Rng& trial_rng) {
  Rng rng = trial_rng.child(0);
  switch (g.experiment) {
    case Experiment::Type1: {
      auto a = sample_normal(rng, p.n);
      auto b = sample_normal(rng, p.n);
      return {std::move(a), std::move(b)};
    }
    case Experiment::GaussStudent: {
      if (!(p.nu > 0.0)) throw std::invalid_argument("gauss-student: degrees of freedom must be > 0");
      auto a = standardize(sample_normal(rng, p.n));
      auto b = standardize(sample_student_t(rng, p.n, p.nu));
      return {std::move(a), std::move(b)};
    }
    case Experiment::Sinusoid: {
      auto joint = sample_sinusoid(rng, p.n, p.delta, p.gamma);
      Sample product = joint;
      if (!g.identity_permutation) {
        const auto sigma = rng.permutation(p.n);
        for (std::size_t i = 0; i < p.n; ++i) product(i, 1) = joint(sigma[i], 1);
      }
      return {std::move(joint), std::move(product)};
    }
  }
  throw std::logic_error("draw_trial: unknown experiment");
}

/// Stream handed to a test inside a trial; keyed by test kind so adding or
/// removing tests leaves the others unchanged.
inline Rng test_stream(const Rng& trial_rng, TestKind kind) {
  return trial_rng.child(1 + static_cast<std::uint64_t>(kind));
}

struct ErrorRow {
  std::string test;
  Experiment experiment = Experiment::Type1;
  GridPoint point{};
  std::size_t trials = 0;
  std::size_t rejections = 0;
  /// Rejection fraction under H0 (type1), acceptance fraction otherwise.
  double rate = 0.0;

  friend bool operator==(const ErrorRow&, const ErrorRow&) = default;
};

struct ErrorTable {
  Experiment experiment = Experiment::Type1;
  std::vector<ErrorRow> rows;

  std::string_view rate_kind() const {
    return experiment == Experiment::Type1 ? "type1" : "type2";
  }
  const ErrorRow* find(std::string_view test, const GridPoint& p) const {
    for (const auto& r : rows) {
      if (r.test == test && r.point == p) return &r;
    }
    return nullptr;
  }
  friend bool operator==(const ErrorTable&, const ErrorTable&) = default;
};

/// Runs every (cell, trial) job; each trial draws fresh data once and runs
/// every selected test on it with a fresh classifier.
inline ErrorTable run_grid(const TrialGrid& g) {
  validate(g);
  const auto cells = grid_cells(g);
  const std::size_t n_tests = g.tests.size();
  const std::size_t jobs = cells.size() * g.trials;
  std::vector<std::uint8_t> rejected(jobs * n_tests, 0);
  TestSettings settings = g.settings;
  settings.alpha = g.alpha;

  parallel_for(jobs, g.workers, [&](std::size_t job) {
    const auto& cell = cells[job / g.trials];
    const Rng trial_rng(trial_seed(g, cell, job % g.trials));
    const auto data = draw_trial(g, cell, trial_rng);
    for (std::size_t t = 0; t < n_tests; ++t) {
      const auto kind = g.tests[t];
      const auto out = run_test(kind, test_stream(trial_rng, kind), data.a, data.b, settings);
      rejected[job * n_tests + t] = out.reject ? 1 : 0;
    }
  });

  ErrorTable table;
  table.experiment = g.experiment;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t t = 0; t < n_tests; ++t) {
      ErrorRow row;
      row.test = std::string(to_string(g.tests[t]));
      row.experiment = g.experiment;
      row.point = cells[c];
      row.trials = g.trials;
      for (std::size_t k = 0; k < g.trials; ++k) {
        row.rejections += rejected[((c * g.trials) + k) * n_tests + t];
      }
      const double reject_rate =
          static_cast<double>(row.rejections) / static_cast<double>(row.trials);
      row.rate = g.experiment == Experiment::Type1 ? reject_rate : 1.0 - reject_rate;
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

/// Both samples N(0, 1); rate is the type-I error.
inline ErrorTable run_type1(TrialGrid g) {
  g.experiment = Experiment::Type1;
  return run_grid(g);
}

/// N(0, 1) against a standardized Student-t(nu), both standardized
/// empirically; rate is the type-II error.
inline ErrorTable run_gauss_student(TrialGrid g) {
  g.experiment = Experiment::GaussStudent;
  return run_grid(g);
}

/// Joint sinusoid sample against a copy with y permuted once per trial;
/// rate is the type-II error.
inline ErrorTable run_sinusoid_independence(TrialGrid g) {
  g.experiment = Experiment::Sinusoid;
  return run_grid(g);
}

namespace detail {
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// Tab-separated table, one row per test x cell. Unused parameters print "-".
inline std::string to_tsv(const ErrorTable& t) {
  std::string out = "test\texperiment\tn\tnu\tdelta\tgamma\ttrials\trejections\trate_kind\trate\n";
  const bool nu = experiment_uses_nu(t.experiment);
  const bool sin = experiment_uses_sinusoid(t.experiment);
  for (const auto& r : t.rows) {
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.4f", r.rate);
    out += r.test + '\t' + std::string(to_string(r.experiment)) + '\t' +
           std::to_string(r.point.n) + '\t' + (nu ? detail::format_double(r.point.nu) : "-") +
           '\t' + (sin ? detail::format_double(r.point.delta) : "-") + '\t' +
           (sin ? detail::format_double(r.point.gamma) : "-") + '\t' +
           std::to_string(r.trials) + '\t' + std::to_string(r.rejections) + '\t' +
           std::string(t.rate_kind()) + '\t' + rate + '\n';
  }
  return out;
}

}  // namespace c2st
