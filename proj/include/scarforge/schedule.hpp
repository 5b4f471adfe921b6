#pragma once

#include <cmath>
#include <vector>

#include "scarforge/errors.hpp"

namespace scarforge {

// DDPM variance schedule. beta[t] and alpha_bar[t] are indexed by time step
// t in 1..T; alpha_bar[0] is pinned to 1 so that diffusing to t=0 is the
// identity.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;       // beta[0] unused, kept 0
  std::vector<double> alpha_bar;  // alpha_bar[0] == 1

  double alpha(int t) const { return 1.0 - beta[static_cast<std::size_t>(t)]; }
  double beta_at(int t) const { return beta[static_cast<std::size_t>(t)]; }
  double alpha_bar_at(int t) const { return alpha_bar[static_cast<std::size_t>(t)]; }

  void check_step(int t) const {
    if (t < 0 || t > T) fail(ErrorCode::OutOfRange, "time step out of [0, T]");
  }
};

enum class ScheduleKind { Linear };

inline NoiseSchedule make_schedule(int T = 1000, double beta_1 = 1e-4, double beta_T = 0.02,
                                   ScheduleKind kind = ScheduleKind::Linear) {
  if (T < 1) fail(ErrorCode::InvalidArgument, "make_schedule: T must be >= 1");
  if (!(beta_1 > 0.0 && beta_1 <= beta_T && beta_T < 1.0)) {
    fail(ErrorCode::InvalidArgument, "make_schedule: need 0 < beta_1 <= beta_T < 1");
  }
  (void)kind;  // one kind today; the parameter fixes the call signature
  NoiseSchedule s;
  s.T = T;
  s.beta.assign(static_cast<std::size_t>(T) + 1, 0.0);
  s.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
  double prod = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double frac = T > 1 ? static_cast<double>(t - 1) / (T - 1) : 0.0;
    const double b = beta_1 + (beta_T - beta_1) * frac;
    s.beta[static_cast<std::size_t>(t)] = b;
    prod *= 1.0 - b;
    s.alpha_bar[static_cast<std::size_t>(t)] = prod;
  }
  return s;
}

// (1 - epoch/epoch_max)^0.9 decay.
inline double poly_lr(int epoch, int epoch_max, double base_lr) {
  if (epoch_max < 1) fail(ErrorCode::InvalidArgument, "poly_lr: epoch_max must be >= 1");
  if (epoch < 0 || epoch > epoch_max) fail(ErrorCode::OutOfRange, "poly_lr: epoch out of [0, epoch_max]");
  return base_lr * std::pow(1.0 - static_cast<double>(epoch) / epoch_max, 0.9);
}

}  // namespace scarforge
