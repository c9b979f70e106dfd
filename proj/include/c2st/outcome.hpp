#pragma once

#include <map>
#include <string>

namespace c2st {

/// Result shared by every two-sample test in the toolkit.
struct TestOutcome {
  std::string test;
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  std::map<std::string, double> diagnostics;

  friend bool operator==(const TestOutcome&, const TestOutcome&) = default;
};

/// Rejection rule: reject H0 iff p < alpha (so alpha = 0 never rejects).
inline bool decide(double p_value, double alpha) { return p_value < alpha; }

}  // namespace c2st
