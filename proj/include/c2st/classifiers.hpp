#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2st/mlp.hpp"
#include "c2st/rng.hpp"
#include "c2st/sample.hpp"

namespace c2st {

struct MlpHyperparams {
  std::size_t hidden = 20;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  AdamSettings adam{};

  friend bool operator==(const MlpHyperparams&, const MlpHyperparams&) = default;
};

/// Network estimating p(l = 1 | z): sigmoid of a one-hidden-layer ReLU net,
/// together with the Adam state that trained it.
class MlpClassifier {
 public:
  MlpClassifier() = default;
  MlpClassifier(std::size_t inputs, MlpHyperparams hp)
      : net_(inputs, hp.hidden), adam_(net_.size(), hp.adam), hyper_(hp) {}

  DenseNet& net() noexcept { return net_; }
  const DenseNet& net() const noexcept { return net_; }
  AdamState& optimizer() noexcept { return adam_; }
  const AdamState& optimizer() const noexcept { return adam_; }
  const MlpHyperparams& hyperparams() const noexcept { return hyper_; }
  std::size_t dim() const noexcept { return net_.inputs(); }

  double logit(std::span<const double> z) const { return net_.output(z); }
  double predict(std::span<const double> z) const { return sigmoid(net_.output(z)); }

  friend bool operator==(const MlpClassifier&, const MlpClassifier&) = default;

 private:
  DenseNet net_;
  AdamState adam_;
  MlpHyperparams hyper_;
};

/// sigma(w2 . relu(W1 z + b1) + b2).
inline double mlp_forward(const MlpClassifier& m, std::span<const double> z) {
  return m.predict(z);
}

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // DenseNet parameter layout
};

/// Mean binary cross-entropy over `rows` of `data` and its exact gradient.
///
/// The gradient is that of the unclamped loss (p - l per example); clamping
/// only guards the logarithm in the reported loss value.
inline LossAndGradient mlp_loss_grad(const MlpClassifier& m, const LabeledDataset& data,
                                     std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("mlp_loss_grad: empty batch");
  LossAndGradient out;
  out.gradient.assign(m.net().size(), 0.0);
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (std::size_t r : rows) {
    const auto z = data.example(r);
    const int l = data.label(r);
    const double a = m.logit(z);
    out.loss += bce_from_logit(a, l);
    m.net().backward(z, (sigmoid(a) - l) * scale, out.gradient);
  }
  out.loss *= scale;
  return out;
}

inline LossAndGradient mlp_loss_grad(const MlpClassifier& m, const LabeledDataset& data) {
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return mlp_loss_grad(m, data, rows);
}

inline void require_both_labels(const LabeledDataset& data, const char* who) {
  if (data.size() < 2 || data.count_label(0) == 0 || data.count_label(1) == 0) {
    throw DegenerateDataError(std::string(who) +
                              ": training set must contain both labels");
  }
}

/// Mini-batch Adam on binary cross-entropy. Rows are reshuffled every epoch;
/// the trailing partial batch is used as is.
inline MlpClassifier mlp_train(Rng& rng, const LabeledDataset& data,
                               const MlpHyperparams& hp = {}) {
  require_both_labels(data, "mlp_train");
  if (hp.batch_size == 0) throw std::invalid_argument("mlp_train: batch_size must be >= 1");
  MlpClassifier m(data.dim(), hp);
  m.net().initialize(rng);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = std::min(hp.batch_size, data.size());
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      const auto g = mlp_loss_grad(m, data, std::span(order).subspan(start, len));
      m.optimizer().update(m.net().params(), g.gradient);
    }
    if (!m.net().all_finite()) {
      throw std::runtime_error("mlp_train: parameters became non-finite");
    }
  }
  return m;
}

/// k-nearest-neighbour voter. Prediction is the fraction of label-1 points
/// among the k Euclidean-nearest stored examples.
///
/// Equidistant candidates are ordered by their coordinates (lexicographic),
/// then by label, so the neighbour set depends only on the stored multiset of
/// (example, label) pairs and not on row order.
class KnnClassifier {
 public:
  KnnClassifier() = default;

  KnnClassifier(LabeledDataset train, std::optional<std::size_t> k = std::nullopt)
      : train_(std::move(train)) {
    if (train_.size() == 0) throw std::invalid_argument("KnnClassifier: empty training set");
    k_ = k.value_or(default_k(train_.size()));
    if (k_ < 1 || k_ > train_.size()) {
      throw std::invalid_argument("KnnClassifier: k must lie in [1, n_train]");
    }
  }

  /// floor(sqrt(n_train)), at least 1.
  static std::size_t default_k(std::size_t n_train) {
    auto k = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_train)));
    while ((k + 1) * (k + 1) <= n_train) ++k;
    while (k * k > n_train) --k;
    return std::max<std::size_t>(k, 1);
  }

  std::size_t k() const noexcept { return k_; }
  const LabeledDataset& training_set() const noexcept { return train_; }
  std::size_t dim() const noexcept { return train_.dim(); }

  double predict(std::span<const double> z) const {
    std::vector<Candidate> scratch;
    return predict(z, scratch);
  }

  /// Probabilities for every row of `queries`.
  std::vector<double> predict_all(const Sample& queries) const {
    std::vector<Candidate> scratch;
    std::vector<double> out(queries.rows());
    for (std::size_t i = 0; i < queries.rows(); ++i) out[i] = predict(queries.row(i), scratch);
    return out;
  }

 private:
  struct Candidate {
    double dist2;
    std::size_t row;
  };

  double predict(std::span<const double> z, std::vector<Candidate>& scratch) const {
    if (z.size() != train_.dim()) {
      throw std::invalid_argument("KnnClassifier: query dimension mismatch");
    }
    const std::size_t n = train_.size();
    scratch.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = train_.example(i);
      double d2 = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) {
        const double diff = x[j] - z[j];
        d2 += diff * diff;
      }
      scratch[i] = {d2, i};
    }
    const auto closer = [this](const Candidate& a, const Candidate& b) {
      if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
      const auto xa = train_.example(a.row);
      const auto xb = train_.example(b.row);
      if (!std::equal(xa.begin(), xa.end(), xb.begin())) {
        return std::lexicographical_compare(xa.begin(), xa.end(), xb.begin(), xb.end());
      }
      return train_.label(a.row) < train_.label(b.row);
    };
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k_ - 1),
                     scratch.end(), closer);
    std::size_t votes = 0;
    for (std::size_t i = 0; i < k_; ++i) votes += train_.label(scratch[i].row);
    return static_cast<double>(votes) / static_cast<double>(k_);
  }

  LabeledDataset train_;
  std::size_t k_ = 1;
};

inline double knn_predict(const KnnClassifier& c, std::span<const double> z) {
  return c.predict(z);
}

}  // namespace c2st
