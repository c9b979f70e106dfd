// Decides the causal direction of one synthetic pair with a small CGAN ensemble.
#include <cstdio>

#include "c2st/causal.hpp"

int main() {
  using namespace c2st;
  Rng rng(11);
  const Sample pairs = sample_heteroskedastic_pair(rng, 500, Direction::YtoX);

  CausalConfig cfg;
  cfg.ensemble = 3;
  const auto verdict = cause_effect(Rng(5), pairs, cfg);
  std::printf("truth Y->X, decided %s (t_xy %.3f, t_yx %.3f)\n",
              std::string(to_string(verdict.direction)).c_str(), verdict.t_xy, verdict.t_yx);
  for (const auto& m : verdict.ensemble) {
    std::printf("  member %zu %s  statistic %.3f\n", m.member,
                std::string(to_string(m.direction)).c_str(), m.statistic);
  }
}
