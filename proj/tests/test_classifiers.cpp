#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "c2st/classifiers.hpp"
#include "c2st/numerics.hpp"

using namespace c2st;

namespace {

LabeledDataset gaussian_clouds(Rng& rng, std::size_t per_class, std::size_t d, double shift) {
  Sample z(2 * per_class, d);
  std::vector<std::uint8_t> labels(2 * per_class);
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    labels[i] = i < per_class ? 0 : 1;
    for (std::size_t j = 0; j < d; ++j) z(i, j) = rng.normal() + (labels[i] ? shift : 0.0);
  }
  return LabeledDataset(std::move(z), std::move(labels));
}

double accuracy(const MlpClassifier& m, const LabeledDataset& data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool predicted = m.predict(data.example(i)) > 0.5;
    correct += predicted == (data.label(i) == 1) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

TEST(LabeledDataset, ValidatesContent) {
  EXPECT_THROW(LabeledDataset(Sample(2, 1, {1.0, 2.0}), {0}), ShapeError);
  EXPECT_THROW(LabeledDataset(Sample(2, 1, {1.0, 2.0}), {0, 2}), std::invalid_argument);
  EXPECT_THROW(LabeledDataset(Sample(2, 1, {1.0, std::nan("")}), {0, 1}), std::invalid_argument);
  EXPECT_THROW(LabeledDataset(Sample(2, 1, {1.0, INFINITY}), {0, 1}), std::invalid_argument);
}

TEST(MlpForward, ZeroNetworkGivesOneHalf) {
  MlpClassifier m(3, {});
  Rng r(1);
  for (int t = 0; t < 20; ++t) {
    const double z[3] = {r.normal() * 10, r.normal(), -r.normal() * 100};
    EXPECT_EQ(mlp_forward(m, z), 0.5);
  }
}

TEST(MlpForward, LargeOutputBiasSaturatesTowardOne) {
  MlpClassifier m(2, {});
  m.net().b2() = 40.0;
  const double z[2] = {0.3, -0.2};
  EXPECT_GT(mlp_forward(m, z), 1.0 - 1e-15);
  EXPECT_LE(mlp_forward(m, z), 1.0);
}

TEST(MlpForward, HandComputedTwoUnitNetwork) {
  MlpHyperparams hp;
  hp.hidden = 2;
  MlpClassifier m(2, hp);
  auto& net = m.net();
  const double w1[4] = {1.0, -1.0, 0.5, 2.0};
  std::copy(w1, w1 + 4, net.w1().begin());
  net.b1()[0] = 0.1;
  net.b1()[1] = -0.2;
  net.w2()[0] = 2.0;
  net.w2()[1] = -1.0;
  net.b2() = 0.3;
  const double z[2] = {0.4, 0.3};
  // h1 = 0.4 - 0.3 + 0.1 = 0.2, h2 = 0.2 + 0.6 - 0.2 = 0.6, out = 0.4 - 0.6 + 0.3 = 0.1
  EXPECT_NEAR(m.logit(z), 0.1, 1e-15);
  EXPECT_NEAR(mlp_forward(m, z), 1.0 / (1.0 + std::exp(-0.1)), 1e-15);

  // Second unit switched off by the ReLU: z = (0.4, -0.5) gives h2 < 0.
  const double z2[2] = {0.4, -0.5};
  // h1 = 0.4 + 0.5 + 0.1 = 1.0, h2 = 0.2 - 1.0 - 0.2 = -1.0 -> 0, out = 2.0 + 0.3
  EXPECT_NEAR(m.logit(z2), 2.3, 1e-15);
}

TEST(MlpForward, DimensionMismatchThrows) {
  MlpClassifier m(3, {});
  const double z[2] = {0.0, 0.0};
  EXPECT_THROW(mlp_forward(m, z), std::invalid_argument);
}

TEST(MlpLoss, ConfidentCorrectPredictionsGiveNearZeroLoss) {
  MlpClassifier m(1, {});
  m.net().b2() = 40.0;
  LabeledDataset data(Sample::column({0.1, 0.2, 0.3}), {1, 1, 1});
  EXPECT_LT(mlp_loss_grad(m, data).loss, 1e-11);
}

TEST(MlpLoss, ConstantOneHalfGivesLogTwo) {
  MlpClassifier m(2, {});
  LabeledDataset data(Sample(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}), {0, 1, 1, 0});
  EXPECT_NEAR(mlp_loss_grad(m, data).loss, std::log(2.0), 1e-15);
}

TEST(MlpLoss, EmptyBatchThrows) {
  MlpClassifier m(1, {});
  LabeledDataset data(Sample::column({0.1}), {1});
  EXPECT_THROW(mlp_loss_grad(m, data, std::span<const std::size_t>{}), std::invalid_argument);
}

TEST(MlpLoss, GradientMatchesCentralDifferences) {
  Rng r(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + r.uniform_index(5);
    MlpHyperparams hp;
    hp.hidden = 1 + r.uniform_index(20);
    MlpClassifier m(d, hp);
    m.net().initialize(r);
    for (double& b : m.net().b1()) b = 0.3 * r.normal();
    m.net().b2() = 0.3 * r.normal();
    const std::size_t n = 1 + r.uniform_index(16);
    Sample z(n, d);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<std::uint8_t>(r.uniform_index(2));
      for (std::size_t j = 0; j < d; ++j) z(i, j) = r.normal();
    }
    const LabeledDataset data(std::move(z), std::move(labels));
    const auto analytic = mlp_loss_grad(m, data).gradient;
    const double h = 1e-5;
    for (std::size_t p = 0; p < analytic.size(); ++p) {
      MlpClassifier plus = m, minus = m;
      plus.net().params()[p] += h;
      minus.net().params()[p] -= h;
      const double numeric =
          (mlp_loss_grad(plus, data).loss - mlp_loss_grad(minus, data).loss) / (2.0 * h);
      const double scale = std::max({std::abs(analytic[p]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic[p] - numeric) / scale);
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(MlpTrain, SeparatesDistantClouds) {
  Rng data_rng(3);
  const auto data = gaussian_clouds(data_rng, 100, 2, 6.0);
  Rng train_rng(4);
  const auto m = mlp_train(train_rng, data);
  EXPECT_GE(accuracy(m, data), 0.95);
}

TEST(MlpTrain, NullDataStaysNearChance) {
  Rng data_rng(5);
  const auto train = gaussian_clouds(data_rng, 1000, 2, 0.0);
  const auto test = gaussian_clouds(data_rng, 1000, 2, 0.0);
  Rng train_rng(6);
  const auto m = mlp_train(train_rng, train);
  EXPECT_NEAR(accuracy(m, test), 0.5, 0.05);
}

TEST(MlpTrain, ZeroEpochsReturnsInitialization) {
  Rng data_rng(7);
  const auto data = gaussian_clouds(data_rng, 10, 3, 1.0);
  MlpHyperparams hp;
  hp.epochs = 0;
  Rng a(8), b(8);
  const auto m = mlp_train(a, data, hp);
  DenseNet expected(3, hp.hidden);
  expected.initialize(b);
  EXPECT_EQ(m.net(), expected);
  EXPECT_EQ(m.optimizer().steps(), 0u);
}

TEST(MlpTrain, BitReproducible) {
  Rng data_rng(9);
  const auto data = gaussian_clouds(data_rng, 150, 2, 0.5);
  Rng a(10), b(10);
  EXPECT_EQ(mlp_train(a, data), mlp_train(b, data));
}

TEST(MlpTrain, SingleClassIsAnError) {
  LabeledDataset data(Sample::column({1, 2, 3}), {1, 1, 1});
  Rng r(1);
  EXPECT_THROW(mlp_train(r, data), DegenerateDataError);
}

TEST(MlpTrain, OutputsStayInsideOpenUnitInterval) {
  Rng data_rng(11);
  const auto data = gaussian_clouds(data_rng, 100, 2, 3.0);
  Rng r(12);
  const auto m = mlp_train(r, data);
  EXPECT_TRUE(m.net().all_finite());
  for (double x = -20; x <= 20; x += 0.5) {
    const double z[2] = {x, -x};
    const double p = mlp_forward(m, z);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Knn, DefaultKIsFloorSqrt) {
  EXPECT_EQ(KnnClassifier::default_k(1), 1u);
  EXPECT_EQ(KnnClassifier::default_k(15), 3u);
  EXPECT_EQ(KnnClassifier::default_k(16), 4u);
  EXPECT_EQ(KnnClassifier::default_k(1000), 31u);
  EXPECT_EQ(KnnClassifier::default_k(1u << 30), 1u << 15);
}

TEST(Knn, RejectsBadK) {
  LabeledDataset data(Sample::column({1, 2, 3}), {0, 1, 0});
  EXPECT_THROW(KnnClassifier(data, 0), std::invalid_argument);
  EXPECT_THROW(KnnClassifier(data, 4), std::invalid_argument);
}

TEST(Knn, OneNeighbourOnStoredPoint) {
  LabeledDataset data(Sample::column({0.0, 1.0, 2.0}), {1, 0, 1});
  const KnnClassifier c(data, 1);
  const double q[1] = {1.0};
  EXPECT_EQ(knn_predict(c, q), 0.0);
}

TEST(Knn, GlobalVoteOnBalancedLabels) {
  Rng r(1);
  const auto data = gaussian_clouds(r, 7, 2, 0.3);
  const KnnClassifier c(data, data.size());
  const double q[2] = {10.0, -3.0};
  EXPECT_EQ(knn_predict(c, q), 0.5);
}

TEST(Knn, FivePointsOnALine) {
  // points 0,1,2,3,4 with labels 1,0,1,1,0; query 2.4: distances 2.4,1.4,0.4,0.6,1.6
  // -> nearest three are 2 (1), 3 (1), 1 (0) -> 2/3
  LabeledDataset data(Sample::column({0, 1, 2, 3, 4}), {1, 0, 1, 1, 0});
  const KnnClassifier c(data, 3);
  const double q[1] = {2.4};
  EXPECT_DOUBLE_EQ(knn_predict(c, q), 2.0 / 3.0);
}

TEST(Knn, MatchesBruteForceAndIsMultipleOfOneOverK) {
  Rng r(13);
  const auto data = gaussian_clouds(r, 40, 3, 0.7);
  const KnnClassifier c(data, 7);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> q(3);
    for (double& v : q) v = r.normal();
    std::vector<std::pair<double, int>> dist;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double d2 = 0;
      for (std::size_t j = 0; j < 3; ++j) d2 += std::pow(data.example(i)[j] - q[j], 2);
      dist.emplace_back(d2, data.label(i));
    }
    std::sort(dist.begin(), dist.end());
    int votes = 0;
    for (int i = 0; i < 7; ++i) votes += dist[i].second;
    const double p = knn_predict(c, q);
    EXPECT_DOUBLE_EQ(p, votes / 7.0);
    EXPECT_DOUBLE_EQ(p * 7.0, std::round(p * 7.0));
  }
}

TEST(Knn, InvariantUnderRowPermutationEvenWithTies) {
  // Integer grid with duplicated points carrying different labels.
  Rng r(14);
  const std::size_t n = 60;
  Sample z(n, 2);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    z(i, 0) = static_cast<double>(r.uniform_index(4));
    z(i, 1) = static_cast<double>(r.uniform_index(4));
    labels[i] = static_cast<std::uint8_t>(r.uniform_index(2));
  }
  const LabeledDataset data(z, labels);
  const KnnClassifier base(data, 5);
  for (int t = 0; t < 20; ++t) {
    const auto perm = r.permutation(n);
    const KnnClassifier shuffled(data.subset(perm), 5);
    for (double a = -0.5; a <= 3.5; a += 0.5) {
      for (double b = -0.5; b <= 3.5; b += 0.5) {
        const double q[2] = {a, b};
        ASSERT_EQ(knn_predict(base, q), knn_predict(shuffled, q));
      }
    }
  }
}

TEST(Knn, LabelFlipGivesComplementExactly) {
  Rng r(15);
  const auto data = gaussian_clouds(r, 50, 2, 0.8);
  std::vector<std::uint8_t> flipped(data.labels().begin(), data.labels().end());
  for (auto& l : flipped) l = static_cast<std::uint8_t>(1 - l);
  const KnnClassifier c(data);
  const KnnClassifier f(LabeledDataset(data.examples(), flipped));
  for (int t = 0; t < 100; ++t) {
    const double q[2] = {2 * r.normal(), 2 * r.normal()};
    const auto k = static_cast<double>(c.k());
    EXPECT_EQ(std::lround(knn_predict(f, q) * k), std::lround(k - knn_predict(c, q) * k));
  }
}

TEST(Knn, PredictAllMatchesPointwise) {
  Rng r(16);
  const auto data = gaussian_clouds(r, 30, 2, 1.0);
  const KnnClassifier c(data);
  const auto queries = gaussian_clouds(r, 10, 2, 0.0).examples();
  const auto all = c.predict_all(queries);
  for (std::size_t i = 0; i < queries.rows(); ++i) EXPECT_EQ(all[i], c.predict(queries.row(i)));
  const double bad[3] = {0, 0, 0};
  EXPECT_THROW(c.predict(bad), std::invalid_argument);
}
