#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "c2st/baselines.hpp"
#include "c2st/c2st.hpp"
#include "c2st/outcome.hpp"
#include "c2st/rng.hpp"
#include "c2st/sample.hpp"

namespace c2st {

enum class TestKind { C2stNn, C2stKnn, Mmd, Ks, Kuiper, Wmw };

inline constexpr std::array<TestKind, 6> kAllTests = {
    TestKind::C2stNn, TestKind::C2stKnn, TestKind::Mmd,
    TestKind::Ks,     TestKind::Kuiper,  TestKind::Wmw};

inline std::string_view to_string(TestKind k) {
  switch (k) {
    case TestKind::C2stNn: return "c2st-nn";
    case TestKind::C2stKnn: return "c2st-knn";
    case TestKind::Mmd: return "mmd";
    case TestKind::Ks: return "ks";
    case TestKind::Kuiper: return "kuiper";
    case TestKind::Wmw: return "wmw";
  }
  return "?";
}

inline std::optional<TestKind> parse_test_kind(std::string_view name) {
  for (TestKind k : kAllTests) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

/// KS, Kuiper and WMW accept one-column samples only.
inline bool is_univariate_only(TestKind k) {
  return k == TestKind::Ks || k == TestKind::Kuiper || k == TestKind::Wmw;
}

/// Everything a test may need beyond the data. `c2st.classifier` is
/// overwritten from the test kind; `c2st.alpha` from `alpha`.
struct TestSettings {
  double alpha = 0.05;
  C2stConfig c2st{};
  KernelConfig kernel{};
  TailMethod tail = TailMethod::Auto;
};

/// Runs one test. Seeded tests (C2ST, MMD) draw only from `rng`'s children.
inline TestOutcome run_test(TestKind kind, const Rng& rng, const Sample& a, const Sample& b,
                            const TestSettings& settings = {}) {
  switch (kind) {
    case TestKind::C2stNn:
    case TestKind::C2stKnn: {
      C2stConfig cfg = settings.c2st;
      cfg.classifier = kind == TestKind::C2stNn ? ClassifierKind::NeuralNet
                                                : ClassifierKind::NearestNeighbours;
      cfg.alpha = settings.alpha;
      cfg.seed = rng.seed();
      return c2st_run(rng, a, b, cfg).as_test_outcome();
    }
    case TestKind::Mmd:
      return mmd_linear_test(rng, a, b, settings.kernel, settings.alpha);
    case TestKind::Ks:
      return ks_test(a, b, settings.alpha, settings.tail);
    case TestKind::Kuiper:
      return kuiper_test(a, b, settings.alpha, settings.tail);
    case TestKind::Wmw:
      return wmw_test(a, b, settings.alpha, settings.tail);
  }
  throw std::logic_error("run_test: unknown test kind");
}

}  // namespace c2st
