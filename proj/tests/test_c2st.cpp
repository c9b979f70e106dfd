#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>

#include "c2st/c2st.hpp"
#include "c2st/numerics.hpp"

using namespace c2st;

namespace {

double oracle_sf(double z) {
  return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), z));
}

double oracle_cdf(double z) {
  return boost::math::cdf(boost::math::normal_distribution<double>(), z);
}

double oracle_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// P(X >= k) for X ~ Binomial(n, 1/2).
double oracle_binomial_tail(std::size_t k, std::size_t n) {
  if (k == 0) return 1.0;
  const boost::math::binomial_distribution<double> b(static_cast<double>(n), 0.5);
  return boost::math::cdf(boost::math::complement(b, static_cast<double>(k - 1)));
}

double oracle_binomial_pmf(std::size_t k, std::size_t n) {
  const boost::math::binomial_distribution<double> b(static_cast<double>(n), 0.5);
  return boost::math::pdf(b, static_cast<double>(k));
}

Sample shifted_normal(Rng& rng, std::size_t n, std::size_t d, std::size_t axis, double shift) {
  Sample s(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) s(i, j) = rng.normal() + (j == axis ? shift : 0.0);
  }
  return s;
}

}  // namespace

TEST(C2stStatistic, WorkedExamples) {
  const double p1[2] = {0.9, 0.1};
  const std::uint8_t l1[2] = {1, 0};
  EXPECT_EQ(c2st_statistic(p1, l1), 1.0);
  const double p2[2] = {0.5, 0.5};
  const std::uint8_t l2[2] = {0, 1};
  EXPECT_EQ(c2st_statistic(p2, l2), 0.5);
}

TEST(C2stStatistic, ConstantClassifierOnBalancedSetIsOneHalf) {
  const std::vector<double> p(10, 0.6);
  const std::vector<std::uint8_t> l = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  EXPECT_EQ(c2st_statistic(p, l), 0.5);
}

TEST(C2stStatistic, MatchesBruteForceCount) {
  Rng r(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> p(10);
    std::vector<std::uint8_t> l(10);
    int correct = 0;
    for (int i = 0; i < 10; ++i) {
      p[i] = r.uniform();
      l[i] = static_cast<std::uint8_t>(r.uniform_index(2));
      if ((p[i] > 0.5 ? 1 : 0) == l[i]) ++correct;
    }
    EXPECT_EQ(c2st_statistic(p, l), correct / 10.0);
  }
}

TEST(C2stStatistic, RejectsBadInput) {
  EXPECT_THROW(c2st_statistic(std::span<const double>{}, std::span<const std::uint8_t>{}),
               std::invalid_argument);
  const double p[2] = {0.1, 0.2};
  const std::uint8_t l[1] = {0};
  EXPECT_THROW(c2st_statistic(p, l), ShapeError);
}

TEST(C2stPValue, AtNullMeanIsOneHalf) {
  for (std::size_t n : {1u, 10u, 1000u}) EXPECT_DOUBLE_EQ(c2st_pvalue(0.5, n), 0.5);
}

TEST(C2stPValue, TwoSigmaExample) {
  EXPECT_NEAR(c2st_pvalue(0.55, 400), oracle_sf(2.0), 1e-14);
  EXPECT_NEAR(c2st_pvalue(0.55, 400), 0.02275, 1e-5);
}

TEST(C2stPValue, TwoSidedDoublesTheSmallerTail) {
  EXPECT_NEAR(c2st_pvalue(0.55, 400, true), 2.0 * oracle_sf(2.0), 1e-14);
  EXPECT_NEAR(c2st_pvalue(0.45, 400, true), 2.0 * oracle_sf(2.0), 1e-14);
  EXPECT_DOUBLE_EQ(c2st_pvalue(0.5, 400, true), 1.0);
}

TEST(C2stPValue, StrictlyDecreasingInAccuracyAndSize) {
  for (std::size_t n : {10u, 100u, 1000u}) {
    double prev = 2.0;
    for (std::size_t k = 0; k <= n; ++k) {
      const double p = c2st_pvalue(static_cast<double>(k) / static_cast<double>(n), n);
      if (p > 1e-300 && p < 1.0 - 1e-12) {
        ASSERT_LT(p, prev) << "n=" << n << " k=" << k;
      } else {
        ASSERT_LE(p, prev);
      }
      prev = p;
    }
  }
  double prev = 1.0;
  for (std::size_t n = 1; n < 2000; n += 7) {
    const double p = c2st_pvalue(0.52, n);
    ASSERT_LT(p, prev);
    prev = p;
  }
}

TEST(C2stPValue, GaussianTracksExactBinomialMidP) {
  // Without a continuity correction the Gaussian value sits between P(X > k)
  // and P(X >= k); it tracks their midpoint.
  for (std::size_t n : {50u, 200u, 1000u}) {
    for (std::size_t k = n / 2; k <= n; k += std::max<std::size_t>(1, n / 50)) {
      const double t = static_cast<double>(k) / static_cast<double>(n);
      const double gauss = c2st_pvalue(t, n);
      const double inclusive = oracle_binomial_tail(k, n);
      const double pmf = oracle_binomial_pmf(k, n);
      EXPECT_NEAR(gauss, inclusive - 0.5 * pmf, 0.02) << "n=" << n << " k=" << k;
      EXPECT_NEAR(gauss, inclusive, 0.5 * pmf + 0.02) << "n=" << n << " k=" << k;
    }
  }
}

TEST(C2stPValue, ExactBinomialTailMatchesOracle) {
  for (std::size_t n : {1u, 2u, 7u, 50u, 200u, 1000u, 10000u}) {
    for (std::size_t k = 0; k <= n; k += std::max<std::size_t>(1, n / 97)) {
      const double ours = binomial_half_upper_tail(k, n);
      const double oracle = oracle_binomial_tail(k, n);
      EXPECT_NEAR(ours, oracle, 1e-12 + 1e-9 * oracle) << "n=" << n << " k=" << k;
    }
  }
  EXPECT_DOUBLE_EQ(c2st_pvalue_exact(0.55, 400), oracle_binomial_tail(220, 400));
  EXPECT_THROW(c2st_pvalue_exact(0.5, kExactBinomialLimit + 2), std::domain_error);
}

TEST(C2stApprox, NullAndAlternative) {
  const auto null = c2st_null_approx(100);
  EXPECT_DOUBLE_EQ(null.mean, 0.5);
  EXPECT_DOUBLE_EQ(null.variance, 1.0 / 400.0);
  const auto same = c2st_alternative_approx(0.5, 100);
  EXPECT_DOUBLE_EQ(same.mean, null.mean);
  EXPECT_DOUBLE_EQ(same.variance, null.variance);
  EXPECT_NEAR(c2st_alternative_approx(0.6, 100).variance, 0.0024, 1e-15);
  EXPECT_THROW(c2st_alternative_approx(0.0, 10), std::domain_error);
  EXPECT_THROW(c2st_alternative_approx(1.0, 10), std::domain_error);
}

TEST(C2stApprox, PoissonBinomialMeanMatchesMeanAccuracy) {
  Rng r(3);
  const std::size_t n_te = 200;
  std::vector<double> p(n_te);
  double mean_p = 0.0;
  for (auto& v : p) {
    v = 0.3 + 0.6 * r.uniform();
    mean_p += v;
  }
  mean_p /= static_cast<double>(n_te);
  for (auto& v : p) v += 0.6 - mean_p;  // heterogeneous, mean exactly 0.6
  double total = 0.0;
  const int reps = 5000;
  for (int rep = 0; rep < reps; ++rep) {
    std::size_t correct = 0;
    for (double pi : p) correct += r.uniform() < pi ? 1 : 0;
    total += static_cast<double>(correct) / static_cast<double>(n_te);
  }
  EXPECT_NEAR(total / reps, c2st_alternative_approx(0.6, n_te).mean, 0.01);
}

TEST(C2stPower, MatchesClosedFormOracle) {
  const auto formula = [](double alpha, double n, double eps) {
    return oracle_cdf((eps * std::sqrt(n) - oracle_quantile(1.0 - alpha) / 2.0) /
                      std::sqrt(0.25 - eps * eps));
  };
  for (double alpha : {0.01, 0.05, 0.1}) {
    for (std::size_t n : {10u, 100u, 500u, 5000u}) {
      for (double eps : {0.01, 0.05, 0.1, 0.3, 0.49}) {
        EXPECT_NEAR(c2st_power({alpha, n, eps}), formula(alpha, static_cast<double>(n), eps), 1e-12);
      }
    }
  }
  EXPECT_NEAR(c2st_power({0.05, 100, 0.1}), 0.6415, 1e-4);
}

TEST(C2stPower, VanishingEffectGivesAlpha) {
  EXPECT_NEAR(c2st_power({0.05, 100, 1e-9}), 0.05, 1e-6);
}

TEST(C2stPower, MonotoneAndConsistent) {
  double prev = 0.0;
  for (double eps = 0.001; eps < 0.5; eps += 0.001) {
    const double p = c2st_power({0.05, 100, eps});
    if (p < 1.0 - 1e-12) {
      ASSERT_GT(p, prev);
    } else {
      ASSERT_GE(p, prev);
    }
    prev = p;
  }
  prev = 0.0;
  for (std::size_t n = 1; n < 3000; n += 3) {
    const double p = c2st_power({0.05, n, 0.02});
    if (p < 1.0 - 1e-12) {
      ASSERT_GT(p, prev);
    } else {
      ASSERT_GE(p, prev);
    }
    prev = p;
  }
  prev = 0.0;
  for (double a = 0.001; a < 1.0; a += 0.001) {
    const double p = c2st_power({a, 100, 0.05});
    if (p < 1.0 - 1e-12) {
      ASSERT_GT(p, prev);
    } else {
      ASSERT_GE(p, prev);
    }
    prev = p;
  }
  EXPECT_GT(c2st_power({0.05, 10000000, 0.01}), 1.0 - 1e-12);
}

TEST(C2stPower, RejectsDomainViolations) {
  EXPECT_THROW(c2st_power({0.05, 100, 0.0}), std::domain_error);
  EXPECT_THROW(c2st_power({0.05, 100, 0.5}), std::domain_error);
  EXPECT_THROW(c2st_power({0.05, 100, 0.6}), std::domain_error);
  EXPECT_THROW(c2st_power({0.0, 100, 0.1}), std::domain_error);
  EXPECT_THROW(c2st_power({1.0, 100, 0.1}), std::domain_error);
  EXPECT_THROW(c2st_power({0.05, 0, 0.1}), std::domain_error);
}

TEST(C2stPower, MonteCarloOfExactAlternative) {
  Rng r(4);
  const std::size_t n_te = 100;
  const double eps = 0.1;
  int rejections = 0;
  const int reps = 10000;
  for (int rep = 0; rep < reps; ++rep) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n_te; ++i) correct += r.uniform() < 0.5 + eps ? 1 : 0;
    rejections += c2st_pvalue(static_cast<double>(correct) / n_te, n_te) < 0.05 ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(rejections) / reps, c2st_power({0.05, n_te, eps}), 0.03);
}

TEST(C2stRun, NullRejectionRateBounded) {
  for (auto kind : {ClassifierKind::NeuralNet, ClassifierKind::NearestNeighbours}) {
    int rejections = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng data(derive_seed(1000, seed));
      const auto a = sample_normal(data, 1000);
      const auto b = sample_normal(data, 1000);
      C2stConfig cfg;
      cfg.classifier = kind;
      cfg.seed = seed;
      rejections += c2st_run(a, b, cfg).reject ? 1 : 0;
    }
    EXPECT_LE(rejections, 11) << to_string(kind);
  }
}

TEST(C2stRun, GrossShiftIsDetected) {
  Rng data(5);
  const auto a = sample_normal(data, 500, 0.0);
  const auto b = sample_normal(data, 500, 10.0);
  for (auto kind : {ClassifierKind::NeuralNet, ClassifierKind::NearestNeighbours}) {
    C2stConfig cfg;
    cfg.classifier = kind;
    cfg.seed = 6;
    const auto out = c2st_run(a, b, cfg);
    EXPECT_GE(out.statistic, 0.95);
    EXPECT_LT(out.p_value, 1e-6);
    EXPECT_TRUE(out.reject);
  }
}

TEST(C2stRun, OutcomeInvariants) {
  Rng data(7);
  const auto a = sample_normal(data, 333);
  const auto b = sample_normal(data, 333, 0.3);
  for (double frac : {0.1, 0.5, 0.77}) {
    for (bool stratified : {true, false}) {
      C2stConfig cfg;
      cfg.train_fraction = frac;
      cfg.stratified = stratified;
      cfg.classifier = ClassifierKind::NearestNeighbours;
      const auto out = c2st_run(a, b, cfg);
      EXPECT_EQ(out.n_tr + out.n_te, 666u);
      const double count = out.statistic * static_cast<double>(out.n_te);
      EXPECT_NEAR(count, std::round(count), 1e-9);
      EXPECT_GE(out.p_value, 0.0);
      EXPECT_LE(out.p_value, 1.0);
      EXPECT_EQ(out.reject, out.p_value < out.alpha);
      ASSERT_EQ(out.examples.size(), out.n_te);
      for (std::size_t i = 0; i < out.n_te; ++i) {
        const auto& r = out.examples[i];
        const Sample& src = r.source == 0 ? a : b;
        EXPECT_EQ(out.test_features(i, 0), src(r.row, 0));
        EXPECT_EQ(r.label, r.source == 0 ? 0 : 1);
      }
    }
  }
}

TEST(C2stRun, StratifiedSplitBalancesTrainingLabels) {
  Rng data(8);
  const auto a = sample_normal(data, 101);
  const auto b = sample_normal(data, 101);
  C2stConfig cfg;
  cfg.classifier = ClassifierKind::NearestNeighbours;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    const auto out = c2st_run(a, b, cfg);
    std::size_t test_ones = 0;
    for (const auto& r : out.examples) test_ones += r.label;
    EXPECT_EQ(test_ones, 50u);  // llround(50.5) = 51 of the 101 ones train
  }
}

TEST(C2stRun, ExchangingSamplesWithSwappedLabelsKeepsStatistic) {
  Rng data(9);
  const auto a = sample_normal(data, 400);
  const auto b = sample_normal(data, 400, 0.2);
  for (auto kind : {ClassifierKind::NeuralNet, ClassifierKind::NearestNeighbours}) {
    C2stConfig cfg;
    cfg.classifier = kind;
    cfg.seed = 10;
    const auto ab = c2st_run(a, b, cfg);
    cfg.swap_labels = true;
    const auto ba = c2st_run(b, a, cfg);
    EXPECT_EQ(ab.statistic, ba.statistic);
    EXPECT_EQ(ab.p_value, ba.p_value);
  }
}

TEST(C2stRun, SeedDeterminesOutcome) {
  Rng data(11);
  const auto a = sample_normal(data, 300);
  const auto b = sample_normal(data, 300, 0.2);
  C2stConfig cfg;
  cfg.seed = 12;
  const auto x = c2st_run(a, b, cfg);
  const auto y = c2st_run(a, b, cfg);
  EXPECT_EQ(x.statistic, y.statistic);
  EXPECT_EQ(x.examples, y.examples);
  EXPECT_EQ(std::get<MlpClassifier>(x.model), std::get<MlpClassifier>(y.model));
}

TEST(C2stRun, ExactAndTwoSidedOptions) {
  Rng data(13);
  const auto a = sample_normal(data, 200);
  const auto b = sample_normal(data, 200, 0.5);
  C2stConfig cfg;
  cfg.classifier = ClassifierKind::NearestNeighbours;
  const auto gauss = c2st_run(a, b, cfg);
  cfg.pvalue_method = PValueMethod::ExactBinomial;
  const auto exact = c2st_run(a, b, cfg);
  EXPECT_EQ(gauss.statistic, exact.statistic);
  const auto k = static_cast<std::size_t>(std::llround(exact.statistic * exact.n_te));
  EXPECT_DOUBLE_EQ(exact.p_value, oracle_binomial_tail(k, exact.n_te));
  cfg.pvalue_method = PValueMethod::Gaussian;
  cfg.two_sided = true;
  const auto two = c2st_run(a, b, cfg);
  EXPECT_DOUBLE_EQ(two.p_value, c2st_pvalue(two.statistic, two.n_te, true));
}

TEST(C2stRun, RejectsInvalidInput) {
  Rng data(14);
  const auto a = sample_normal(data, 20);
  const auto b = sample_normal(data, 21);
  C2stConfig cfg;
  EXPECT_THROW(c2st_run(a, b, cfg), ShapeError);
  EXPECT_THROW(c2st_run(a, Sample(20, 2), cfg), ShapeError);
  cfg.train_fraction = 0.0;
  EXPECT_THROW(c2st_run(a, a, cfg), std::invalid_argument);
  cfg.train_fraction = 1.0;
  EXPECT_THROW(c2st_run(a, a, cfg), std::invalid_argument);
  cfg.train_fraction = 0.01;  // round(0.4) = 0 training rows
  EXPECT_THROW(c2st_run(a, a, cfg), std::invalid_argument);
}

TEST(C2stRun, UnstratifiedSingleClassTrainingSetIsAnError) {
  const auto a = Sample::column({1.0, 2.0});
  const auto b = Sample::column({3.0, 4.0});
  C2stConfig cfg;
  cfg.stratified = false;
  cfg.train_fraction = 0.5;
  cfg.classifier = ClassifierKind::NearestNeighbours;
  int errors = 0;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    cfg.seed = seed;
    try {
      c2st_run(a, b, cfg);
    } catch (const DegenerateDataError&) {
      ++errors;
    }
  }
  // Two of the six equally likely training pairs are single-class.
  EXPECT_GT(errors, 5);
  EXPECT_LT(errors, 40);
}

TEST(C2stInterpret, DiscriminativeFeaturePointsAtShiftedAxis) {
  Rng data(15);
  const auto a = shifted_normal(data, 1000, 5, 1, 0.0);
  const auto b = shifted_normal(data, 1000, 5, 1, 1.5);
  C2stConfig cfg;
  cfg.seed = 16;
  const auto report = c2st_interpret(c2st_run(a, b, cfg));
  ASSERT_TRUE(report.features.has_value());
  const auto& f = report.features->discriminative;
  ASSERT_EQ(f.size(), 5u);
  std::size_t top = 0;
  for (std::size_t j = 1; j < f.size(); ++j) {
    if (std::abs(f[j]) > std::abs(f[top])) top = j;
  }
  EXPECT_EQ(top, 1u);
  EXPECT_EQ(report.features->first_layer.rows(), cfg.mlp.hidden);
}

TEST(C2stInterpret, NullConfidencesConcentrateNearOneHalf) {
  Rng data(17);
  const auto a = sample_normal(data, 1000);
  const auto b = sample_normal(data, 1000);
  for (auto kind : {ClassifierKind::NeuralNet, ClassifierKind::NearestNeighbours}) {
    C2stConfig cfg;
    cfg.classifier = kind;
    const auto report = c2st_interpret(c2st_run(a, b, cfg));
    std::vector<double> conf;
    for (const auto& r : report.ranked) conf.push_back(r.confidence());
    std::nth_element(conf.begin(), conf.begin() + conf.size() / 2, conf.end());
    EXPECT_LT(conf[conf.size() / 2], 0.15) << to_string(kind);
    for (std::size_t i = 1; i < report.ranked.size(); ++i) {
      ASSERT_GE(report.ranked[i - 1].confidence(), report.ranked[i].confidence());
    }
    EXPECT_EQ(report.features.has_value(), kind == ClassifierKind::NeuralNet);
  }
}

TEST(C2stInterpret, SingleTestExampleGivesOneRecord) {
  Rng data(18);
  const auto a = sample_normal(data, 50);
  const auto b = sample_normal(data, 50, 1.0);
  C2stConfig cfg;
  cfg.train_fraction = 0.99;
  cfg.classifier = ClassifierKind::NearestNeighbours;
  const auto out = c2st_run(a, b, cfg);
  ASSERT_EQ(out.n_te, 1u);
  EXPECT_EQ(c2st_interpret(out).ranked.size(), 1u);
}

TEST(C2stInterpret, OneDimensionalFeatures) {
  Rng data(19);
  const auto a = sample_normal(data, 200);
  const auto b = sample_normal(data, 200, 1.0);
  const auto report = c2st_interpret(c2st_run(a, b, C2stConfig{}));
  ASSERT_TRUE(report.features.has_value());
  EXPECT_EQ(report.features->first_layer.cols(), 1u);
  EXPECT_EQ(report.features->discriminative.size(), 1u);
}
