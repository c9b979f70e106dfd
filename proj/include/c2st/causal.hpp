#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "c2st/classifiers.hpp"
#include "c2st/mlp.hpp"
#include "c2st/numerics.hpp"
#include "c2st/parallel.hpp"
#include "c2st/rng.hpp"
#include "c2st/sample.hpp"
#include "c2st/two_sample.hpp"

namespace c2st {

enum class Direction { XtoY, YtoX };

inline std::string_view to_string(Direction d) { return d == Direction::XtoY ? "X->Y" : "Y->X"; }

inline Direction reversed(Direction d) {
  return d == Direction::XtoY ? Direction::YtoX : Direction::XtoY;
}

/// Column holding the cause / the effect for a direction.
inline std::size_t cause_column(Direction d) { return d == Direction::XtoY ? 0 : 1; }
inline std::size_t effect_column(Direction d) { return 1 - cause_column(d); }

class CganDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CganHyperparams {
  std::size_t hidden = 32;
  std::size_t iterations = 3000;
  std::size_t batch_size = 64;
  AdamSettings adam{1e-3, 0.5, 0.999, 1e-8};

  friend bool operator==(const CganHyperparams&, const CganHyperparams&) = default;
};

/// Conditional GAN for one direction. The generator maps (cause, noise) to an
/// effect value; the discriminator scores (cause, effect) pairs.
struct Cgan {
  Direction direction = Direction::XtoY;
  CganHyperparams hyper{};
  DenseNet generator;
  DenseNet discriminator;
  AdamState generator_opt;
  AdamState discriminator_opt;

  Cgan() = default;
  Cgan(Direction dir, const CganHyperparams& hp)
      : direction(dir),
        hyper(hp),
        generator(2, hp.hidden),
        discriminator(2, hp.hidden),
        generator_opt(generator.size(), hp.adam),
        discriminator_opt(discriminator.size(), hp.adam) {}

  double generate(double cause, double noise) const {
    const double in[2] = {cause, noise};
    return generator.output(in);
  }
  double discriminate_logit(double cause, double effect) const {
    const double in[2] = {cause, effect};
    return discriminator.output(in);
  }

  friend bool operator==(const Cgan&, const Cgan&) = default;
};

/// Discriminator loss  mean_i BCE(d(c_i, e_i), 1) + mean_i BCE(d(c_i, g(c_i, z_i)), 0)
/// over one batch and its gradient in the discriminator's parameter layout.
inline LossAndGradient cgan_discriminator_loss_grad(const Cgan& g, std::span<const double> cause,
                                                    std::span<const double> effect,
                                                    std::span<const double> noise) {
  if (cause.empty() || cause.size() != effect.size() || cause.size() != noise.size()) {
    throw std::invalid_argument("cgan_discriminator_loss_grad: batch shapes differ or are empty");
  }
  LossAndGradient out;
  out.gradient.assign(g.discriminator.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(cause.size());
  for (std::size_t i = 0; i < cause.size(); ++i) {
    const double real[2] = {cause[i], effect[i]};
    const double a_real = g.discriminator.output(real);
    out.loss += bce_from_logit(a_real, 1);
    g.discriminator.backward(real, (sigmoid(a_real) - 1.0) * scale, out.gradient);

    const double fake[2] = {cause[i], g.generate(cause[i], noise[i])};
    const double a_fake = g.discriminator.output(fake);
    out.loss += bce_from_logit(a_fake, 0);
    g.discriminator.backward(fake, sigmoid(a_fake) * scale, out.gradient);
  }
  out.loss *= scale;
  return out;
}

/// Non-saturating generator loss  mean_i -log d(c_i, g(c_i, z_i))  and its
/// gradient in the generator's parameter layout.
inline LossAndGradient cgan_generator_loss_grad(const Cgan& g, std::span<const double> cause,
                                                std::span<const double> noise) {
  if (cause.empty() || cause.size() != noise.size()) {
    throw std::invalid_argument("cgan_generator_loss_grad: batch shapes differ or are empty");
  }
  LossAndGradient out;
  out.gradient.assign(g.generator.size(), 0.0);
  std::vector<double> unused(g.discriminator.size());
  const double scale = 1.0 / static_cast<double>(cause.size());
  for (std::size_t i = 0; i < cause.size(); ++i) {
    const double gen_in[2] = {cause[i], noise[i]};
    const double fake[2] = {cause[i], g.generator.output(gen_in)};
    const double a = g.discriminator.output(fake);
    out.loss += bce_from_logit(a, 1);
    double d_input[2] = {0.0, 0.0};
    g.discriminator.backward(fake, (sigmoid(a) - 1.0) * scale, unused, d_input);
    g.generator.backward(gen_in, d_input[1], out.gradient);
  }
  out.loss *= scale;
  return out;
}

inline void require_standardized(const Sample& pairs, const char* who) {
  for (std::size_t j = 0; j < pairs.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < pairs.rows(); ++i) mean += pairs(i, j);
    mean /= static_cast<double>(pairs.rows());
    double var = 0.0;
    for (std::size_t i = 0; i < pairs.rows(); ++i) var += (pairs(i, j) - mean) * (pairs(i, j) - mean);
    var /= static_cast<double>(pairs.rows());
    if (std::abs(mean) > 1e-6 || std::abs(var - 1.0) > 1e-6) {
      throw std::invalid_argument(std::string(who) + ": column " + std::to_string(j) +
                                  " is not standardized");
    }
  }
}

/// Alternating Adam updates: one discriminator step, then one generator step
/// on fresh noise, per iteration. Batches are drawn with replacement.
inline Cgan cgan_train(Rng& rng, const Sample& pairs, Direction direction,
                       const CganHyperparams& hp = {}) {
  if (pairs.cols() != 2) throw ShapeError("cgan_train: expected two columns");
  if (pairs.rows() < 50) throw std::invalid_argument("cgan_train: need n >= 50");
  if (!pairs.all_finite()) throw std::invalid_argument("cgan_train: non-finite data");
  if (hp.batch_size == 0) throw std::invalid_argument("cgan_train: batch_size must be >= 1");
  require_standardized(pairs, "cgan_train");

  Cgan g(direction, hp);
  g.generator.initialize(rng);
  g.discriminator.initialize(rng);
  const std::size_t c_col = cause_column(direction);
  const std::size_t e_col = effect_column(direction);
  const std::size_t b = hp.batch_size;
  std::vector<double> cause(b), effect(b), noise(b);

  for (std::size_t it = 0; it < hp.iterations; ++it) {
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t r = rng.uniform_index(pairs.rows());
      cause[i] = pairs(r, c_col);
      effect[i] = pairs(r, e_col);
      noise[i] = rng.normal();
    }
    const auto dg = cgan_discriminator_loss_grad(g, cause, effect, noise);
    g.discriminator_opt.update(g.discriminator.params(), dg.gradient);

    for (double& z : noise) z = rng.normal();
    const auto gg = cgan_generator_loss_grad(g, cause, noise);
    g.generator_opt.update(g.generator.params(), gg.gradient);

    if (!g.generator.all_finite() || !g.discriminator.all_finite()) {
      throw CganDivergence("cgan_train: parameters became non-finite at iteration " +
                           std::to_string(it));
    }
  }
  return g;
}

/// One synthetic pair per conditioning value, in (X, Y) column order: the
/// conditioning value goes to the cause column, the generated value to the
/// effect column.
inline Sample cgan_synthesize(const Cgan& g, std::span<const double> conditioning, Rng& rng) {
  Sample out(conditioning.size(), 2);
  const std::size_t c_col = cause_column(g.direction);
  const std::size_t e_col = effect_column(g.direction);
  for (std::size_t i = 0; i < conditioning.size(); ++i) {
    out(i, c_col) = conditioning[i];
    out(i, e_col) = g.generate(conditioning[i], rng.normal());
  }
  return out;
}

struct CausalConfig {
  std::size_t ensemble = 10;
  CganHyperparams cgan{};
  /// Test comparing real and synthetic pairs: c2st-knn, c2st-nn or mmd.
  TestKind scoring = TestKind::C2stKnn;
  TestSettings scoring_settings{};
  std::size_t workers = 0;
};

struct EnsembleRecord {
  std::size_t member = 0;
  std::uint64_t seed = 0;
  Direction direction = Direction::XtoY;
  bool diverged = false;
  double statistic = std::numeric_limits<double>::quiet_NaN();

  friend bool operator==(const EnsembleRecord& a, const EnsembleRecord& b) {
    const bool same_stat = (std::isnan(a.statistic) && std::isnan(b.statistic)) ||
                           a.statistic == b.statistic;
    return a.member == b.member && a.seed == b.seed && a.direction == b.direction &&
           a.diverged == b.diverged && same_stat;
  }
};

struct CausalVerdict {
  Direction direction = Direction::XtoY;
  double t_xy = 0.0;
  double t_yx = 0.0;
  /// t_xy == t_yx; the direction is then X->Y.
  bool tie = false;
  std::vector<EnsembleRecord> ensemble;

  friend bool operator==(const CausalVerdict&, const CausalVerdict&) = default;
};

/// Pairs as (cause, effect) columns, for scoring in a direction-relative
/// orientation.
inline Sample cause_effect_view(const Sample& xy, Direction d) {
  return d == Direction::XtoY ? xy : xy.swap_columns(0, 1);
}

/// Trains `ensemble` CGANs per direction, scores each synthetic dataset
/// against the real one and prefers the direction whose best member scores
/// lower.
///
/// Member e uses child e of `rng` in both directions: its child 0 trains,
/// child 1 synthesizes, child 2 drives the scoring test. Scoring sees the data
/// as (cause, effect) columns, so swapping X and Y swaps t_xy and t_yx exactly.
inline CausalVerdict cause_effect(const Rng& rng, const Sample& pairs,
                                  const CausalConfig& cfg = {}) {
  if (pairs.cols() != 2) throw ShapeError("cause_effect: expected two columns");
  if (cfg.ensemble == 0) throw std::invalid_argument("cause_effect: ensemble must be >= 1");
  if (cfg.scoring != TestKind::C2stKnn && cfg.scoring != TestKind::C2stNn &&
      cfg.scoring != TestKind::Mmd) {
    throw std::invalid_argument("cause_effect: scoring must be c2st-knn, c2st-nn or mmd");
  }
  const Sample data = standardize(pairs);

  CausalVerdict verdict;
  verdict.ensemble.resize(2 * cfg.ensemble);
  parallel_for(2 * cfg.ensemble, cfg.workers, [&](std::size_t job) {
    const std::size_t member = job / 2;
    const Direction dir = job % 2 == 0 ? Direction::XtoY : Direction::YtoX;
    const Rng member_rng = rng.child(member);
    EnsembleRecord rec;
    rec.member = member;
    rec.seed = member_rng.seed();
    rec.direction = dir;
    try {
      Rng train_rng = member_rng.child(0);
      const Cgan g = cgan_train(train_rng, data, dir, cfg.cgan);
      Rng synth_rng = member_rng.child(1);
      const Sample fake = cgan_synthesize(g, data.column_values(cause_column(dir)), synth_rng);
      if (!fake.all_finite()) throw CganDivergence("cause_effect: non-finite synthetic data");
      rec.statistic = run_test(cfg.scoring, member_rng.child(2), cause_effect_view(data, dir),
                               cause_effect_view(fake, dir), cfg.scoring_settings)
                          .statistic;
    } catch (const CganDivergence&) {
      rec.diverged = true;
    }
    verdict.ensemble[job] = rec;
  });

  const auto best = [&](Direction dir) {
    std::optional<double> t;
    for (const auto& r : verdict.ensemble) {
      if (r.direction != dir || r.diverged) continue;
      if (!t || r.statistic < *t) t = r.statistic;
    }
    if (!t) {
      throw CganDivergence("cause_effect: every " + std::string(to_string(dir)) +
                           " member diverged");
    }
    return *t;
  };
  verdict.t_xy = best(Direction::XtoY);
  verdict.t_yx = best(Direction::YtoX);
  verdict.tie = verdict.t_xy == verdict.t_yx;
  verdict.direction = verdict.t_xy <= verdict.t_yx ? Direction::XtoY : Direction::YtoX;
  return verdict;
}

/// x ~ N(0, 1), y = x^3 + noise_scale * |x| * e with e ~ N(0, 1), so X
/// causes Y and the noise spread grows with |x|. Columns are swapped when
/// `truth` is Y->X.
inline Sample sample_heteroskedastic_pair(Rng& rng, std::size_t n,
                                          Direction truth = Direction::XtoY,
                                          double noise_scale = 0.3) {
  Sample out(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double y = x * x * x + noise_scale * std::abs(x) * rng.normal();
    out(i, cause_column(truth)) = x;
    out(i, effect_column(truth)) = y;
  }
  return out;
}

}  // namespace c2st
