#pragma once

// Entropy-tracking temperature control: each step the sampling temperature is
// moved by the closed-form update so that measured policy entropy returns to a
// target, which optionally decays along a cosine schedule late in training.

#include <cstdint>
#include <optional>

namespace tgrpo {

struct SchedulerConfig {
  double eta = 0.9;              // annealing floor, as a fraction of H_init
  std::int64_t t_anneal = 0;     // first annealed step
  std::int64_t t_max = 0;        // last training step
  std::int64_t vocab_size = 64;
  double tau_init = 1.0;
  double tau_min = 0.25;
  double tau_max = 4.0;
  bool annealing_enabled = false;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct SchedulerState {
  double tau = 1.0;
  std::optional<double> h_init;
  std::int64_t step = 0;
};

SchedulerState initial_state(const SchedulerConfig& config);

/// Records H_init. Throws StateError on a second call.
SchedulerState observe_first_batch(SchedulerState state, double mean_entropy);

/// H_init before t_anneal (or with annealing off); afterwards
/// H_init * [eta + (1 - eta) * (1 + cos(pi * (t - t_anneal) / (t_max - t_anneal))) / 2],
/// holding at eta * H_init past t_max.
double target_entropy(const SchedulerConfig& config, double h_init,
                      std::int64_t t);

/// Applies the update with alpha = target(t) / H_t and clamps the result.
/// A non-positive multiplier (alpha far below 1) lands on tau_min.
SchedulerState step_temperature(SchedulerState state,
                                const SchedulerConfig& config,
                                double measured_entropy, std::int64_t t);

}  // namespace tgrpo
