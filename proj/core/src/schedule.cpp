#include "treg/schedule.hpp"

#include "treg/errors.hpp"

#include <cmath>
#include <string>

namespace treg {

NoiseSchedule::NoiseSchedule(int steps, std::vector<double> alpha_bar)
    : steps_(steps), alpha_bar_(std::move(alpha_bar)) {
  if (steps_ < 1) throw ConfigError("schedule.T must be >= 1");
  if (static_cast<int>(alpha_bar_.size()) != steps_ + 1)
    throw ConfigError("schedule.alpha_bar must have T + 1 entries");
  if (alpha_bar_[0] != 1.0) throw ConfigError("schedule.alpha_bar[0] must be 1");
  for (int t = 1; t <= steps_; ++t) {
    if (!(alpha_bar_[t] > 0.0 && alpha_bar_[t] < alpha_bar_[t - 1]))
      throw ConfigError("schedule.alpha_bar must be strictly decreasing and positive (t=" +
                        std::to_string(t) + ")");
  }
  beta_tilde_.resize(steps_);
  for (int t = 1; t <= steps_; ++t) {
    const double prev = alpha_bar_[t - 1];
    const double cur = alpha_bar_[t];
    beta_tilde_[t - 1] = std::sqrt((1.0 - prev) / (1.0 - cur)) * std::sqrt(1.0 - cur / prev);
  }
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps_)
    throw RangeError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps_) + "]");
  return alpha_bar_[t];
}

double NoiseSchedule::beta_tilde(int t) const {
  if (t < 1 || t > steps_)
    throw RangeError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps_) + "]");
  return beta_tilde_[t - 1];
}

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("schedule.T must be >= 1");
  if (!(beta_start > 0.0 && beta_start < 1.0))
    throw ConfigError("schedule.beta_start must lie in (0, 1)");
  if (!(beta_end > 0.0 && beta_end < 1.0)) throw ConfigError("schedule.beta_end must lie in (0, 1)");
  if (beta_start > beta_end) throw ConfigError("schedule.beta_start must not exceed schedule.beta_end");

  std::vector<double> alpha_bar(steps + 1);
  alpha_bar[0] = 1.0;
  for (int s = 1; s <= steps; ++s) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(s - 1) / (steps - 1);
    const double beta = beta_start + (beta_end - beta_start) * frac;
    alpha_bar[s] = alpha_bar[s - 1] * (1.0 - beta);
  }
  return NoiseSchedule(steps, std::move(alpha_bar));
}

std::vector<int> subsample_steps(const NoiseSchedule& sched, int nfe) {
  const int T = sched.steps();
  if (nfe < 1) throw ConfigError("solver.nfe must be >= 1");
  if (nfe > T) throw ConfigError("solver.nfe (" + std::to_string(nfe) + ") exceeds schedule.T (" +
                                 std::to_string(T) + ")");
  std::vector<int> out(nfe);
  for (int i = 0; i < nfe; ++i) {
    out[i] = T - static_cast<int>((static_cast<long long>(i) * T) / nfe);
  }
  return out;
}

}  // namespace treg
