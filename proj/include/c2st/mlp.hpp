#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2st/rng.hpp"

namespace c2st {

inline double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

/// Fully connected network with one ReLU hidden layer and a scalar linear
/// output:  out(z) = w2 . relu(W1 z + b1) + b2.
///
/// All parameters live in one flat vector, laid out as
///   [ W1 (hidden x inputs, row-major) | b1 (hidden) | w2 (hidden) | b2 ].
/// Gradients use the same layout, which is also the serialized field order.
class DenseNet {
 public:
  DenseNet() = default;

  DenseNet(std::size_t inputs, std::size_t hidden)
      : inputs_(inputs), hidden_(hidden), params_(parameter_count(inputs, hidden), 0.0) {
    if (inputs == 0 || hidden == 0) {
      throw std::invalid_argument("DenseNet: inputs and hidden width must be >= 1");
    }
  }

  static std::size_t parameter_count(std::size_t inputs, std::size_t hidden) {
    return hidden * inputs + 2 * hidden + 1;
  }

  /// Glorot-uniform weights, zero biases.
  void initialize(Rng& rng) {
    std::fill(params_.begin(), params_.end(), 0.0);
    const double limit1 = std::sqrt(6.0 / static_cast<double>(inputs_ + hidden_));
    for (double& w : w1()) w = limit1 * (2.0 * rng.uniform() - 1.0);
    const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden_ + 1));
    for (double& w : w2()) w = limit2 * (2.0 * rng.uniform() - 1.0);
  }

  std::size_t inputs() const noexcept { return inputs_; }
  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t size() const noexcept { return params_.size(); }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  std::span<double> w1() { return {params_.data(), hidden_ * inputs_}; }
  std::span<double> b1() { return {params_.data() + hidden_ * inputs_, hidden_}; }
  std::span<double> w2() { return {params_.data() + hidden_ * (inputs_ + 1), hidden_}; }
  double& b2() { return params_.back(); }
  std::span<const double> w1() const { return {params_.data(), hidden_ * inputs_}; }
  std::span<const double> b1() const {
    return {params_.data() + hidden_ * inputs_, hidden_};
  }
  std::span<const double> w2() const {
    return {params_.data() + hidden_ * (inputs_ + 1), hidden_};
  }
  double b2() const { return params_.back(); }

  /// Pre-activation of hidden unit h.
  double hidden_preactivation(std::span<const double> z, std::size_t h) const {
    const double* w = params_.data() + h * inputs_;
    double a = params_[hidden_ * inputs_ + h];
    for (std::size_t j = 0; j < inputs_; ++j) a += w[j] * z[j];
    return a;
  }

  double output(std::span<const double> z) const {
    check_input(z);
    const auto v = w2();
    double out = b2();
    for (std::size_t h = 0; h < hidden_; ++h) {
      const double a = hidden_preactivation(z, h);
      if (a > 0.0) out += v[h] * a;
    }
    return out;
  }

  /// Accumulates d(out)/d(params) * upstream into `grad` and, when non-empty,
  /// d(out)/d(z) * upstream into `input_grad`.
  void backward(std::span<const double> z, double upstream, std::span<double> grad,
                std::span<double> input_grad = {}) const {
    check_input(z);
    const auto v = w2();
    double* gw1 = grad.data();
    double* gb1 = grad.data() + hidden_ * inputs_;
    double* gw2 = grad.data() + hidden_ * (inputs_ + 1);
    for (std::size_t h = 0; h < hidden_; ++h) {
      const double a = hidden_preactivation(z, h);
      if (a <= 0.0) continue;
      gw2[h] += upstream * a;
      const double da = upstream * v[h];
      gb1[h] += da;
      const double* w = params_.data() + h * inputs_;
      for (std::size_t j = 0; j < inputs_; ++j) {
        gw1[h * inputs_ + j] += da * z[j];
        if (!input_grad.empty()) input_grad[j] += da * w[j];
      }
    }
    grad.back() += upstream;
  }

  bool all_finite() const {
    return std::all_of(params_.begin(), params_.end(),
                       [](double p) { return std::isfinite(p); });
  }

  friend bool operator==(const DenseNet&, const DenseNet&) = default;

 private:
  void check_input(std::span<const double> z) const {
    if (z.size() != inputs_) {
      throw std::invalid_argument("DenseNet: input dimension " + std::to_string(z.size()) +
                                  " != " + std::to_string(inputs_));
    }
  }

  std::size_t inputs_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> params_;
};

struct AdamSettings {
  double step = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamSettings&, const AdamSettings&) = default;
};

/// Adam moment accumulators for one parameter vector.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(std::size_t n, AdamSettings settings = {})
      : settings_(settings), first_(n, 0.0), second_(n, 0.0) {}

  void update(std::span<double> params, std::span<const double> grad) {
    ++steps_;
    const auto& s = settings_;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_[i] = s.beta1 * first_[i] + (1.0 - s.beta1) * grad[i];
      second_[i] = s.beta2 * second_[i] + (1.0 - s.beta2) * grad[i] * grad[i];
      const double m_hat = first_[i] / c1;
      const double v_hat = second_[i] / c2;
      params[i] -= s.step * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
  }

  std::size_t steps() const noexcept { return steps_; }
  const AdamSettings& settings() const noexcept { return settings_; }

  friend bool operator==(const AdamState&, const AdamState&) = default;

 private:
  AdamSettings settings_;
  std::vector<double> first_;
  std::vector<double> second_;
  std::size_t steps_ = 0;
};

/// Binary cross-entropy of a sigmoid output given its logit. The probability
/// is clamped to [1e-12, 1 - 1e-12] before the log.
inline double bce_from_logit(double logit, int label) {
  constexpr double lo = 1e-12;
  const double p = std::clamp(sigmoid(logit), lo, 1.0 - lo);
  return label == 1 ? -std::log(p) : -std::log1p(-p);
}

}  // namespace c2st
