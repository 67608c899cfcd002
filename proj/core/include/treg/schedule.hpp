#pragma once

#include <vector>

namespace treg {

// Discrete variance-preserving schedule. alpha_bar(0) == 1 is a sentinel so
// that "previous step" formulas at the last sampler step need no branch.
class NoiseSchedule {
 public:
  NoiseSchedule(int steps, std::vector<double> alpha_bar);

  int steps() const { return steps_; }

  // 0 <= t <= T
  double alpha_bar(int t) const;
  // DDIM posterior std coefficient, 1 <= t <= T.
  double beta_tilde(int t) const;

  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

 private:
  int steps_;
  std::vector<double> alpha_bar_;   // T + 1 entries
  std::vector<double> beta_tilde_;  // T entries, beta_tilde_[t - 1]
};

// Linear-beta schedule, alpha_bar_t = prod_{s <= t} (1 - beta_s).
NoiseSchedule make_schedule(int steps, double beta_start, double beta_end);

// nfe strictly decreasing timesteps, t_i = T - floor(i * T / nfe).
std::vector<int> subsample_steps(const NoiseSchedule& sched, int nfe);

}  // namespace treg
