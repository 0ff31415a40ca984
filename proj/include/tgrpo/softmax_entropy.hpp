#pragma once

// Temperature-parameterized softmax, Shannon entropy (nats), the low-entropy
// outlier-logit approximations, and the closed-form temperature update that
// scales entropy by a requested factor.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tgrpo/rng.hpp"

namespace tgrpo {

/// Finite logits z_1..z_N with N >= 2.
class LogitVector {
 public:
  explicit LogitVector(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double max() const;
  /// True when every logit equals the first one.
  bool all_equal() const;

 private:
  std::vector<double> values_;
};

/// A probability vector: entries in [0, 1] summing to 1 within 1e-12.
class ProbVector {
 public:
  explicit ProbVector(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

// Unchecked kernels shared with the policy code. `out` must match `logits` in
// size; tau must be positive.
void softmax_into(std::span<const double> logits, double tau,
                  std::span<double> out);
/// -sum p ln p with 0 ln 0 := 0.
double entropy_of(std::span<const double> probs);

ProbVector softmax_at_temperature(const LogitVector& logits, double tau);
double shannon_entropy(const ProbVector& p);

/// Entropy of softmax(logits / tau) evaluated in log-space.
double entropy_at_temperature(const LogitVector& logits, double tau);

/// ln N + ln ln N, the vocabulary-only estimate of the outlier gap.
double delta_approximation(std::int64_t vocab_size);

/// (n - 1) * beta * delta * exp(-beta * delta).
double entropy_approximation(double beta, double delta, std::int64_t n);

/// tau * (1 + tau * ln(alpha) / (ln|V| + ln ln|V|)). Throws std::range_error
/// if the multiplier is not positive.
double closed_form_temperature_update(double tau, double alpha,
                                      std::int64_t vocab_size);

/// The multiplier of closed_form_temperature_update without the sign check.
double temperature_multiplier(double tau, double alpha, std::int64_t vocab_size);

struct TemperatureBracket {
  double lo = 0.125;
  double hi = 8.0;
};

/// Root of H(softmax(logits / tau)) = target by bisection in log(tau).
/// Entropy is strictly increasing in tau for non-constant logits.
double bisect_temperature_for_entropy(
    const LogitVector& logits, double target_entropy, double tol = 1e-9,
    std::optional<TemperatureBracket> bracket = std::nullopt);

/// One logit at `delta`, the rest i.i.d. normal(0, noise_std^2).
LogitVector generate_outlier_logits(std::size_t vocab_size, double delta,
                                    double noise_std, Rng& rng);

/// Exact entropy of the ideal two-level vector (delta, 0, ..., 0) at tau,
/// without materializing it.
double two_level_entropy(std::int64_t vocab_size, double delta, double tau);

/// The delta at which the ideal two-level vector has the given entropy at
/// tau = 1. Requires 0 < entropy < ln N.
double delta_for_entropy(std::int64_t vocab_size, double entropy);

/// One cell of the closed-form fidelity sweep.
struct FidelityRow {
  std::int64_t vocab_size = 0;
  double base_entropy = 0.0;
  double alpha = 0.0;
  double delta = 0.0;
  double tau_closed_form = 0.0;
  double tau_bisection = 0.0;
  double realized_ratio = 0.0;
  double ratio_error = 0.0;     // |H(tau')/H(tau) - alpha|
  double tau_rel_error = 0.0;   // |tau' - tau*| / tau*
};

/// Builds ideal outlier logits reaching each base entropy at tau = 1, applies
/// the closed-form update for each alpha and measures the realized ratio and
/// the disagreement with the bisection root.
std::vector<FidelityRow> run_fidelity_sweep(
    std::span<const std::int64_t> vocab_sizes,
    std::span<const double> base_entropies, std::span<const double> alphas);

}  // namespace tgrpo
