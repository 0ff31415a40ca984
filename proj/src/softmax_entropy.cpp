#include "tgrpo/softmax_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tgrpo/errors.hpp"

namespace tgrpo {
namespace {

void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw std::domain_error("temperature must be positive and finite, got " +
                            std::to_string(tau));
}

}  // namespace

LogitVector::LogitVector(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.size() < 2)
    throw std::domain_error("logit vector needs at least two entries");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::domain_error("non-finite logit");
}

double LogitVector::max() const {
  return *std::max_element(values_.begin(), values_.end());
}

bool LogitVector::all_equal() const {
  return std::all_of(values_.begin(), values_.end(),
                     [&](double v) { return v == values_.front(); });
}

ProbVector::ProbVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::domain_error("empty probability vector");
  double sum = 0.0;
  for (double p : values_) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::domain_error("probability outside [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::domain_error("probabilities do not sum to 1");
}

void softmax_into(std::span<const double> logits, double tau,
                  std::span<double> out) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - zmax) / tau);
    z += out[i];
  }
  for (double& p : out) p /= z;
}

double entropy_of(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return std::max(h, 0.0);
}

ProbVector softmax_at_temperature(const LogitVector& logits, double tau) {
  require_tau(tau);
  std::vector<double> p(logits.size());
  softmax_into(logits.values(), tau, p);
  return ProbVector(std::move(p));
}

double shannon_entropy(const ProbVector& p) { return entropy_of(p.values()); }

double entropy_at_temperature(const LogitVector& logits, double tau) {
  require_tau(tau);
  // H = ln Z + beta * sum p_i (z_max - z_i), with Z over shifted logits.
  const double zmax = logits.max();
  double z = 0.0;
  double weighted = 0.0;
  for (double v : logits.values()) {
    const double gap = (zmax - v) / tau;
    const double w = std::exp(-gap);
    z += w;
    weighted += w * gap;
  }
  return std::max(std::log(z) + weighted / z, 0.0);
}

double delta_approximation(std::int64_t vocab_size) {
  if (vocab_size < 3)
    throw std::domain_error("delta approximation needs vocab_size >= 3");
  const double ln_n = std::log(static_cast<double>(vocab_size));
  return ln_n + std::log(ln_n);
}

double entropy_approximation(double beta, double delta, std::int64_t n) {
  if (!(beta > 0.0) || !(delta > 0.0) || n < 2)
    throw std::domain_error("entropy approximation needs beta, delta > 0, n >= 2");
  const double x = beta * delta;
  return static_cast<double>(n - 1) * x * std::exp(-x);
}

double temperature_multiplier(double tau, double alpha,
                              std::int64_t vocab_size) {
  require_tau(tau);
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::domain_error("alpha must be positive and finite");
  return 1.0 + tau * std::log(alpha) / delta_approximation(vocab_size);
}

double closed_form_temperature_update(double tau, double alpha,
                                      std::int64_t vocab_size) {
  const double m = temperature_multiplier(tau, alpha, vocab_size);
  if (!(m > 0.0))
    throw std::range_error("temperature update would be non-positive (alpha " +
                           std::to_string(alpha) + ")");
  return tau * m;
}

double bisect_temperature_for_entropy(const LogitVector& logits,
                                      double target_entropy, double tol,
                                      std::optional<TemperatureBracket> bracket) {
  if (logits.all_equal())
    throw DegenerateInputError(
        "entropy of constant logits is ln N at every temperature");
  if (!(tol > 0.0)) throw std::domain_error("tolerance must be positive");
  const TemperatureBracket b = bracket.value_or(TemperatureBracket{});
  if (!(b.lo > 0.0) || !(b.hi > b.lo))
    throw std::domain_error("bracket must satisfy 0 < lo < hi");

  const double h_lo = entropy_at_temperature(logits, b.lo);
  const double h_hi = entropy_at_temperature(logits, b.hi);
  if (std::abs(h_lo - target_entropy) <= tol) return b.lo;
  if (std::abs(h_hi - target_entropy) <= tol) return b.hi;
  if (!(h_lo < target_entropy && target_entropy < h_hi))
    throw BracketError("bracket [" + std::to_string(b.lo) + ", " +
                       std::to_string(b.hi) + "] does not straddle entropy " +
                       std::to_string(target_entropy));

  double lo = std::log(b.lo);
  double hi = std::log(b.hi);
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double h = entropy_at_temperature(logits, std::exp(mid));
    if (std::abs(h - target_entropy) <= tol) break;
    if (h < target_entropy)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-15) break;
  }
  return std::exp(mid);
}

LogitVector generate_outlier_logits(std::size_t vocab_size, double delta,
                                    double noise_std, Rng& rng) {
  if (vocab_size < 2) throw std::domain_error("vocab_size must be >= 2");
  if (!(noise_std >= 0.0)) throw std::domain_error("noise_std must be >= 0");
  std::vector<double> z(vocab_size, 0.0);
  z[0] = delta;
  for (std::size_t i = 1; i < vocab_size; ++i)
    z[i] = noise_std == 0.0 ? 0.0 : noise_std * standard_normal(rng);
  return LogitVector(std::move(z));
}

double two_level_entropy(std::int64_t vocab_size, double delta, double tau) {
  require_tau(tau);
  const double x = delta / tau;
  const double w = std::exp(-x);
  const double rest = static_cast<double>(vocab_size - 1);
  const double z = 1.0 + rest * w;
  // H = ln Z + x * (rest * w / Z)
  return std::log(z) + x * rest * w / z;
}

double delta_for_entropy(std::int64_t vocab_size, double entropy) {
  const double hmax = std::log(static_cast<double>(vocab_size));
  if (!(entropy > 0.0 && entropy < hmax))
    throw std::domain_error("target entropy must lie in (0, ln N)");
  double lo = 0.0;
  double hi = 1.0;
  while (two_level_entropy(vocab_size, hi, 1.0) > entropy) hi *= 2.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-14 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (two_level_entropy(vocab_size, mid, 1.0) > entropy)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<FidelityRow> run_fidelity_sweep(
    std::span<const std::int64_t> vocab_sizes,
    std::span<const double> base_entropies, std::span<const double> alphas) {
  std::vector<FidelityRow> rows;
  for (std::int64_t v : vocab_sizes) {
    for (double h0 : base_entropies) {
      const double delta = delta_for_entropy(v, h0);
      std::vector<double> z(static_cast<std::size_t>(v), 0.0);
      z[0] = delta;
      const LogitVector logits(std::move(z));
      const double h_base = entropy_at_temperature(logits, 1.0);
      for (double alpha : alphas) {
        FidelityRow row;
        row.vocab_size = v;
        row.base_entropy = h0;
        row.alpha = alpha;
        row.delta = delta;
        row.tau_closed_form = closed_form_temperature_update(1.0, alpha, v);
        row.realized_ratio =
            entropy_at_temperature(logits, row.tau_closed_form) / h_base;
        row.ratio_error = std::abs(row.realized_ratio - alpha);
        row.tau_bisection =
            bisect_temperature_for_entropy(logits, alpha * h_base, 1e-9);
        row.tau_rel_error = std::abs(row.tau_closed_form - row.tau_bisection) /
                            row.tau_bisection;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace tgrpo
