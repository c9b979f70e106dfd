#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "c2st/classifiers.hpp"
#include "c2st/numerics.hpp"
#include "c2st/outcome.hpp"
#include "c2st/rng.hpp"
#include "c2st/sample.hpp"

namespace c2st {

enum class ClassifierKind { NeuralNet, NearestNeighbours };

inline std::string_view to_string(ClassifierKind k) {
  return k == ClassifierKind::NeuralNet ? "nn" : "knn";
}

enum class PValueMethod { Gaussian, ExactBinomial };

inline std::string_view to_string(PValueMethod m) {
  return m == PValueMethod::Gaussian ? "gaussian" : "exact-binomial";
}

struct C2stConfig {
  ClassifierKind classifier = ClassifierKind::NeuralNet;
  /// Fraction of the 2n pooled rows used for training.
  double train_fraction = 0.5;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  bool two_sided = false;
  PValueMethod pvalue_method = PValueMethod::Gaussian;
  /// Label the first sample 1 and the second 0 instead of the reverse.
  bool swap_labels = false;
  /// Split each label group in proportion. With a plain cut of one shuffled
  /// list the train and test label imbalances are anti-correlated, which
  /// pulls held-out accuracy below 1/2 under H0 for intercept-driven models.
  bool stratified = true;
  MlpHyperparams mlp{};
  /// Overrides floor(sqrt(n_train)).
  std::optional<std::size_t> knn_k;
};

/// One held-out example: where it came from, its label and f(z).
struct ExampleRecord {
  /// 0 for the first input sample, 1 for the second.
  int source = 0;
  std::size_t row = 0;
  std::uint8_t label = 0;
  double probability = 0.5;

  double confidence() const { return std::abs(probability - 0.5); }
  friend bool operator==(const ExampleRecord&, const ExampleRecord&) = default;
};

using TrainedClassifier = std::variant<MlpClassifier, KnnClassifier>;

struct C2stOutcome {
  double statistic = 0.0;  // held-out accuracy t
  std::size_t n_te = 0;
  std::size_t n_tr = 0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  ClassifierKind classifier = ClassifierKind::NeuralNet;
  std::vector<ExampleRecord> examples;  // test-set order
  Sample test_features;                 // row i belongs to examples[i]
  TrainedClassifier model;

  TestOutcome as_test_outcome() const {
    TestOutcome t;
    t.test = std::string("c2st-") + std::string(to_string(classifier));
    t.statistic = statistic;
    t.p_value = p_value;
    t.reject = reject;
    t.alpha = alpha;
    t.diagnostics["n_te"] = static_cast<double>(n_te);
    t.diagnostics["n_tr"] = static_cast<double>(n_tr);
    return t;
  }
};

/// Held-out accuracy: mean of I[ I(f(z_i) > 1/2) == l_i ].
inline double c2st_statistic(std::span<const double> predictions,
                             std::span<const std::uint8_t> labels) {
  if (predictions.empty()) throw std::invalid_argument("c2st_statistic: empty input");
  if (predictions.size() != labels.size()) {
    throw ShapeError("c2st_statistic: predictions and labels differ in length");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::uint8_t predicted = predictions[i] > 0.5 ? 1 : 0;
    correct += (predicted == labels[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

/// N(1/2, 1/(4 n_te)).
inline GaussianApprox c2st_null_approx(std::size_t n_te) {
  return GaussianApprox(0.5, 0.25 / static_cast<double>(n_te));
}

/// N(p, p(1-p)/n_te): Binomial(n_te, p) stand-in for the Poisson-Binomial
/// law of the correct-count under the alternative.
inline GaussianApprox c2st_alternative_approx(double mean_accuracy, std::size_t n_te) {
  if (!(mean_accuracy > 0.0 && mean_accuracy < 1.0)) {
    throw std::domain_error("c2st_alternative_approx: mean accuracy must lie in (0, 1)");
  }
  if (n_te == 0) throw std::invalid_argument("c2st_alternative_approx: n_te must be >= 1");
  return GaussianApprox(mean_accuracy,
                        mean_accuracy * (1.0 - mean_accuracy) / static_cast<double>(n_te));
}

/// Gaussian-null p-value. One-sided: 1 - Phi((t - 1/2) sqrt(4 n_te)).
inline double c2st_pvalue(double accuracy, std::size_t n_te, bool two_sided = false) {
  if (n_te == 0) throw std::invalid_argument("c2st_pvalue: n_te must be >= 1");
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw std::domain_error("c2st_pvalue: accuracy must lie in [0, 1]");
  }
  const double z = (accuracy - 0.5) * std::sqrt(4.0 * static_cast<double>(n_te));
  if (two_sided) return std::min(1.0, 2.0 * normal_sf(std::abs(z)));
  return normal_sf(z);
}

inline constexpr std::size_t kExactBinomialLimit = 10000;

/// P(X >= k) for X ~ Binomial(n, 1/2).
inline double binomial_half_upper_tail(std::size_t k, std::size_t n) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  if (2 * k <= n) {
    // Lower part holds the mass; complement of the (small) lower tail,
    // which by symmetry equals P(X >= n - k + 1).
    return 1.0 - binomial_half_upper_tail(n - k + 1, n);
  }
  const long double log_norm = std::lgamma(static_cast<long double>(n) + 1.0L) -
                               static_cast<long double>(n) * std::log(2.0L);
  long double sum = 0.0L;
  for (std::size_t j = n + 1; j-- > k;) {
    const long double log_pmf = log_norm - std::lgamma(static_cast<long double>(j) + 1.0L) -
                                std::lgamma(static_cast<long double>(n - j) + 1.0L);
    sum += std::exp(log_pmf);
  }
  return static_cast<double>(std::min(sum, 1.0L));
}

/// Exact Binomial(n_te, 1/2) p-value for n_te <= kExactBinomialLimit.
inline double c2st_pvalue_exact(double accuracy, std::size_t n_te, bool two_sided = false) {
  if (n_te == 0 || n_te > kExactBinomialLimit) {
    throw std::domain_error("c2st_pvalue_exact: n_te must lie in [1, 10000]");
  }
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw std::domain_error("c2st_pvalue_exact: accuracy must lie in [0, 1]");
  }
  const auto k = static_cast<std::size_t>(std::llround(accuracy * static_cast<double>(n_te)));
  const double upper = binomial_half_upper_tail(k, n_te);
  if (!two_sided) return upper;
  const double lower = binomial_half_upper_tail(n_te - k, n_te);  // P(X <= k)
  return std::min(1.0, 2.0 * std::min(upper, lower));
}

struct PowerQuery {
  double alpha = 0.05;
  std::size_t n_te = 100;
  double epsilon = 0.1;
};

/// Approximate power of the accuracy test when the classifier's expected
/// accuracy is 1/2 + epsilon:
///   Phi( (epsilon sqrt(n_te) - Phi^{-1}(1 - alpha) / 2) / sqrt(1/4 - epsilon^2) ).
/// The rejection threshold uses the null variance 1/(4 n_te); the alternative
/// spread uses (1/4 - epsilon^2)/n_te.
inline double c2st_power(const PowerQuery& q) {
  if (!(q.epsilon > 0.0 && q.epsilon < 0.5)) {
    throw std::domain_error("c2st_power: epsilon must lie in (0, 1/2)");
  }
  if (!(q.alpha > 0.0 && q.alpha < 1.0)) {
    throw std::domain_error("c2st_power: alpha must lie in (0, 1)");
  }
  if (q.n_te == 0) throw std::domain_error("c2st_power: n_te must be >= 1");
  const double z_alpha = normal_quantile(1.0 - q.alpha);
  const double num = q.epsilon * std::sqrt(static_cast<double>(q.n_te)) - 0.5 * z_alpha;
  return normal_cdf(num / std::sqrt(0.25 - q.epsilon * q.epsilon));
}

inline double c2st_outcome_pvalue(double accuracy, std::size_t n_te, const C2stConfig& cfg) {
  return cfg.pvalue_method == PValueMethod::Gaussian
             ? c2st_pvalue(accuracy, n_te, cfg.two_sided)
             : c2st_pvalue_exact(accuracy, n_te, cfg.two_sided);
}

/// Reorders a shuffled row list so its first `n_tr` entries hold each label
/// in proportion to the label counts; relative order is otherwise kept.
inline std::vector<std::size_t> stratify(const std::vector<std::size_t>& order,
                                         const std::vector<std::uint8_t>& labels,
                                         std::size_t n_tr) {
  std::size_t ones = 0;
  for (auto l : labels) ones += l;
  const std::size_t quota1 = static_cast<std::size_t>(std::llround(
      static_cast<double>(n_tr) * static_cast<double>(ones) / static_cast<double>(labels.size())));
  const std::size_t quota0 = n_tr - quota1;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::size_t taken0 = 0;
  std::size_t taken1 = 0;
  for (std::size_t row : order) {
    auto& taken = labels[row] == 1 ? taken1 : taken0;
    const std::size_t quota = labels[row] == 1 ? quota1 : quota0;
    if (taken < quota) {
      ++taken;
      train.push_back(row);
    } else {
      test.push_back(row);
    }
  }
  train.insert(train.end(), test.begin(), test.end());
  return train;
}

/// The classifier two-sample test.
///
/// Pools the samples into {(p_i, 0)} u {(q_i, 1)}, shuffles the 2n rows once,
/// trains on round(train_fraction * 2n) of them (taken per label group when
/// `stratified`, else the leading rows) and scores held-out accuracy on the rest.
///
/// Streams: child 0 of `rng` drives the shuffle, child 1 the classifier.
inline C2stOutcome c2st_run(const Rng& rng, const Sample& s_p, const Sample& s_q,
                            const C2stConfig& cfg) {
  if (s_p.cols() != s_q.cols()) {
    throw ShapeError("c2st_run: dimension mismatch (" + std::to_string(s_p.cols()) +
                     " vs " + std::to_string(s_q.cols()) + ")");
  }
  if (s_p.rows() != s_q.rows()) {
    throw ShapeError("c2st_run: samples must have equal sizes (" +
                     std::to_string(s_p.rows()) + " vs " + std::to_string(s_q.rows()) + ")");
  }
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw std::invalid_argument("c2st_run: train fraction must lie in (0, 1)");
  }
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) {
    throw std::invalid_argument("c2st_run: alpha must lie in [0, 1]");
  }
  const std::size_t n = s_p.rows();
  const std::size_t total = 2 * n;
  const auto n_tr = static_cast<std::size_t>(
      std::llround(cfg.train_fraction * static_cast<double>(total)));
  if (n_tr < 2 || n_tr >= total) {
    throw std::invalid_argument("c2st_run: split leaves " + std::to_string(n_tr) +
                                " training and " + std::to_string(total - n_tr) +
                                " test rows; need >= 2 and >= 1");
  }
  const std::size_t n_te = total - n_tr;

  const Sample& label0 = cfg.swap_labels ? s_q : s_p;
  const Sample& label1 = cfg.swap_labels ? s_p : s_q;
  const auto pooled = LabeledDataset::from_two_samples(label0, label1);

  Rng shuffle_rng = rng.child(0);
  auto order = shuffle_rng.permutation(total);
  if (cfg.stratified) order = stratify(order, pooled.labels(), n_tr);
  const std::span<const std::size_t> train_rows(order.data(), n_tr);
  const std::span<const std::size_t> test_rows(order.data() + n_tr, n_te);
  const auto train = pooled.subset(train_rows);
  require_both_labels(train, "c2st_run");
  const auto test = pooled.subset(test_rows);

  C2stOutcome out;
  out.n_tr = n_tr;
  out.n_te = n_te;
  out.alpha = cfg.alpha;
  out.classifier = cfg.classifier;

  std::vector<double> probs;
  if (cfg.classifier == ClassifierKind::NeuralNet) {
    Rng train_rng = rng.child(1);
    auto model = mlp_train(train_rng, train, cfg.mlp);
    probs.resize(n_te);
    for (std::size_t i = 0; i < n_te; ++i) probs[i] = model.predict(test.example(i));
    out.model = std::move(model);
  } else {
    KnnClassifier model(train, cfg.knn_k);
    probs = model.predict_all(test.examples());
    out.model = std::move(model);
  }

  out.statistic = c2st_statistic(probs, test.labels());
  out.p_value = c2st_outcome_pvalue(out.statistic, n_te, cfg);
  out.reject = decide(out.p_value, cfg.alpha);

  out.examples.resize(n_te);
  for (std::size_t i = 0; i < n_te; ++i) {
    const std::size_t pooled_row = test_rows[i];
    const std::uint8_t label = test.label(i);
    const bool from_second = (label == 1) != cfg.swap_labels;
    out.examples[i] = ExampleRecord{from_second ? 1 : 0,
                                    label == 0 ? pooled_row : pooled_row - n, label,
                                    probs[i]};
  }
  out.test_features = test.examples();
  return out;
}

inline C2stOutcome c2st_run(const Sample& s_p, const Sample& s_q, const C2stConfig& cfg) {
  return c2st_run(Rng(cfg.seed), s_p, s_q, cfg);
}

/// First-layer features of a trained network, arranged as in the usual
/// "most activated per class" reading.
struct NetworkFeatures {
  Sample first_layer;  // hidden x d
  std::size_t positive_unit = 0;
  std::size_t negative_unit = 0;
  std::vector<double> positive;        // W1 row most activated on label-1 examples
  std::vector<double> negative;        // W1 row most activated on label-0 examples
  std::vector<double> discriminative;  // positive - negative
  std::vector<double> mean_activation_positive;
  std::vector<double> mean_activation_negative;
};

struct InterpretReport {
  /// Held-out examples by decreasing |f(z) - 1/2|; ties keep test-set order.
  std::vector<ExampleRecord> ranked;
  std::optional<NetworkFeatures> features;  // neural-net classifier only
};

inline NetworkFeatures network_features(const DenseNet& net, const Sample& features,
                                        std::span<const ExampleRecord> records) {
  const std::size_t h = net.hidden();
  const std::size_t d = net.inputs();
  NetworkFeatures f;
  f.first_layer = Sample(h, d, std::vector<double>(net.w1().begin(), net.w1().end()));
  f.mean_activation_positive.assign(h, 0.0);
  f.mean_activation_negative.assign(h, 0.0);
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& acc = records[i].label == 1 ? f.mean_activation_positive : f.mean_activation_negative;
    (records[i].label == 1 ? n_pos : n_neg) += 1;
    for (std::size_t u = 0; u < h; ++u) {
      acc[u] += std::max(0.0, net.hidden_preactivation(features.row(i), u));
    }
  }
  for (auto& v : f.mean_activation_positive) v /= static_cast<double>(std::max<std::size_t>(n_pos, 1));
  for (auto& v : f.mean_activation_negative) v /= static_cast<double>(std::max<std::size_t>(n_neg, 1));

  const auto argmax = [](const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  };
  f.positive_unit = argmax(f.mean_activation_positive);
  f.negative_unit = argmax(f.mean_activation_negative);
  const auto pos = f.first_layer.row(f.positive_unit);
  const auto neg = f.first_layer.row(f.negative_unit);
  f.positive.assign(pos.begin(), pos.end());
  f.negative.assign(neg.begin(), neg.end());
  f.discriminative.resize(d);
  for (std::size_t j = 0; j < d; ++j) f.discriminative[j] = pos[j] - neg[j];
  return f;
}

/// Records by decreasing |f(z) - 1/2|; equal confidences keep their order.
inline std::vector<ExampleRecord> rank_by_confidence(std::vector<ExampleRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const ExampleRecord& a, const ExampleRecord& b) {
                     return a.confidence() > b.confidence();
                   });
  return records;
}

inline InterpretReport c2st_interpret(const C2stOutcome& outcome) {
  InterpretReport report;
  report.ranked = rank_by_confidence(outcome.examples);
  if (const auto* mlp = std::get_if<MlpClassifier>(&outcome.model)) {
    report.features = network_features(mlp->net(), outcome.test_features, outcome.examples);
  }
  return report;
}

}  // namespace c2st
