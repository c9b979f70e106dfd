// Compares a Gaussian sample with a standardized Student-t sample using every
// test in the toolkit, then asks how much power a C2ST would have.
#include <cstdio>

#include "c2st/c2st.hpp"
#include "c2st/numerics.hpp"
#include "c2st/two_sample.hpp"

int main() {
  using namespace c2st;
  Rng data_rng(2024);
  const Sample gauss = standardize(sample_normal(data_rng, 2000));
  const Sample student = standardize(sample_student_t(data_rng, 2000, 3.0));

  std::printf("%-9s %10s %12s  %s\n", "test", "statistic", "p-value", "decision");
  for (TestKind kind : kAllTests) {
    const auto out = run_test(kind, Rng(7), gauss, student);
    std::printf("%-9s %10.4f %12.3g  %s\n", out.test.c_str(), out.statistic, out.p_value,
                out.reject ? "reject" : "accept");
  }

  C2stConfig cfg;
  cfg.seed = 7;
  const auto nn = c2st_run(gauss, student, cfg);
  const auto report = c2st_interpret(nn);
  std::printf("\nmost confident held-out examples:\n");
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& r = report.ranked[i];
    std::printf("  %s[%zu] = %+.3f  f = %.3f\n", r.source == 0 ? "gauss" : "student", r.row,
                (r.source == 0 ? gauss : student)(r.row, 0),
                r.probability);
  }

  for (double eps : {0.02, 0.05, 0.1}) {
    std::printf("power at eps=%.2f with n_te=%zu: %.4f\n", eps, nn.n_te,
                c2st_power({0.05, nn.n_te, eps}));
  }
}
