#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace c2st {

/// Raised when data cannot support the requested computation
/// (constant columns, single-class training sets, zero-variance ranks).
class DegenerateDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on incompatible shapes (dimension or size mismatch).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Row-major n x d matrix of doubles, one example per row.
class Sample {
 public:
  Sample() = default;

  Sample(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

  Sample(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw ShapeError("Sample: value count " + std::to_string(values_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }

  /// One-dimensional sample from a list of scalars.
  static Sample column(std::vector<double> values) {
    const std::size_t n = values.size();
    return Sample(n, 1, std::move(values));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return values_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }

  std::vector<double> column_values(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  const std::vector<double>& values() const noexcept { return values_; }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  /// Rows selected by index, in the given order.
  Sample select_rows(std::span<const std::size_t> indices) const {
    Sample out(indices.size(), cols_);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const auto src = row(indices[r]);
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
  }

  /// Copy with columns i and j exchanged.
  Sample swap_columns(std::size_t i, std::size_t j) const {
    Sample out = *this;
    for (std::size_t r = 0; r < rows_; ++r) std::swap(out(r, i), out(r, j));
    return out;
  }

  friend bool operator==(const Sample&, const Sample&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Examples z_i with binary labels l_i.
class LabeledDataset {
 public:
  LabeledDataset() = default;

  LabeledDataset(Sample examples, std::vector<std::uint8_t> labels)
      : examples_(std::move(examples)), labels_(std::move(labels)) {
    if (examples_.rows() != labels_.size()) {
      throw ShapeError("LabeledDataset: " + std::to_string(examples_.rows()) +
                       " rows but " + std::to_string(labels_.size()) + " labels");
    }
    for (auto l : labels_) {
      if (l > 1) throw std::invalid_argument("LabeledDataset: labels must be 0 or 1");
    }
    if (!examples_.all_finite()) {
      throw std::invalid_argument("LabeledDataset: non-finite feature value");
    }
  }

  /// {(p_i, 0)} followed by {(q_i, 1)}.
  static LabeledDataset from_two_samples(const Sample& label0, const Sample& label1) {
    if (label0.cols() != label1.cols()) {
      throw ShapeError("dimension mismatch: " + std::to_string(label0.cols()) +
                       " vs " + std::to_string(label1.cols()));
    }
    std::vector<double> values;
    values.reserve(label0.values().size() + label1.values().size());
    values.insert(values.end(), label0.values().begin(), label0.values().end());
    values.insert(values.end(), label1.values().begin(), label1.values().end());
    std::vector<std::uint8_t> labels(label0.rows(), 0);
    labels.resize(label0.rows() + label1.rows(), 1);
    return LabeledDataset(
        Sample(label0.rows() + label1.rows(), label0.cols(), std::move(values)),
        std::move(labels));
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return examples_.cols(); }
  const Sample& examples() const noexcept { return examples_; }
  const std::vector<std::uint8_t>& labels() const noexcept { return labels_; }
  std::span<const double> example(std::size_t i) const { return examples_.row(i); }
  std::uint8_t label(std::size_t i) const { return labels_[i]; }

  std::size_t count_label(std::uint8_t l) const {
    std::size_t c = 0;
    for (auto v : labels_) c += (v == l);
    return c;
  }

  LabeledDataset subset(std::span<const std::size_t> indices) const {
    std::vector<std::uint8_t> labels(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) labels[r] = labels_[indices[r]];
    LabeledDataset out;
    out.examples_ = examples_.select_rows(indices);
    out.labels_ = std::move(labels);
    return out;
  }

 private:
  Sample examples_;
  std::vector<std::uint8_t> labels_;
};

}  // namespace c2st
