#include "tgrpo/temp_scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tgrpo/errors.hpp"
#include "tgrpo/softmax_entropy.hpp"

namespace tgrpo {

void SchedulerConfig::validate() const {
  if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("eta must lie in [0, 1)");
  if (vocab_size < 3) throw ConfigError("scheduler vocab_size must be >= 3");
  if (!(tau_min > 0.0 && tau_min < tau_init && tau_init < tau_max))
    throw ConfigError("need 0 < tau_min < tau_init < tau_max");
  if (annealing_enabled && !(0 < t_anneal && t_anneal < t_max))
    throw ConfigError("annealing needs 0 < t_anneal < t_max");
}

SchedulerState initial_state(const SchedulerConfig& config) {
  SchedulerState s;
  s.tau = config.tau_init;
  return s;
}

SchedulerState observe_first_batch(SchedulerState state, double mean_entropy) {
  if (state.h_init) throw StateError("H_init is already set");
  if (!(mean_entropy > 0.0) || !std::isfinite(mean_entropy))
    throw std::domain_error("first-batch entropy must be positive");
  state.h_init = mean_entropy;
  return state;
}

double target_entropy(const SchedulerConfig& config, double h_init,
                      std::int64_t t) {
  if (!config.annealing_enabled || t < config.t_anneal) return h_init;
  const std::int64_t tc = std::min(t, config.t_max);
  const double progress = static_cast<double>(tc - config.t_anneal) /
                          static_cast<double>(config.t_max - config.t_anneal);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return h_init * (config.eta + (1.0 - config.eta) * cosine);
}

SchedulerState step_temperature(SchedulerState state,
                                const SchedulerConfig& config,
                                double measured_entropy, std::int64_t t) {
  if (!state.h_init) throw StateError("observe_first_batch has not been called");
  if (!(measured_entropy > 0.0) || !std::isfinite(measured_entropy))
    throw std::domain_error("measured entropy must be positive");
  const double alpha = target_entropy(config, *state.h_init, t) / measured_entropy;
  const double m = temperature_multiplier(state.tau, alpha, config.vocab_size);
  const double next = m > 0.0 ? state.tau * m : config.tau_min;
  state.tau = std::clamp(next, config.tau_min, config.tau_max);
  state.step = t + 1;
  return state;
}

}  // namespace tgrpo
