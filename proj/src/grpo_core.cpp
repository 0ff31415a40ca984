#include "tgrpo/grpo_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tgrpo/softmax_entropy.hpp"

namespace tgrpo {
namespace {

constexpr double kZeroStd = 1e-8;

// Gradient of min(rA, clip(r)A) with respect to r.
double surrogate_ratio_slope(double ratio, double advantage, double epsilon) {
  if (advantage > 0.0) return ratio < 1.0 + epsilon ? advantage : 0.0;
  if (advantage < 0.0) return ratio > 1.0 - epsilon ? advantage : 0.0;
  return 0.0;
}

void check_group(const GroupExperience& g, const PolicyTable& table) {
  if (g.slot >= table.slots()) throw std::domain_error("group slot out of range");
  if (!g.base_logits.empty() &&
      g.base_logits.size() != table.length() * table.vocab())
    throw std::domain_error("base logits do not match the table shape");
  if (g.trajectories.size() != g.advantages.size())
    throw std::domain_error("advantages and trajectories differ in length");
  if (!(g.temperature > 0.0)) throw std::domain_error("temperature must be positive");
}

std::size_t batch_token_count(std::span<const GroupExperience> groups) {
  std::size_t n = 0;
  for (const auto& g : groups)
    for (const auto& tr : g.trajectories) n += tr.tokens.size();
  return n;
}

}  // namespace

std::vector<double> group_advantages(std::span<const double> rewards,
                                     StdEstimator estimator) {
  if (rewards.size() < 2)
    throw std::domain_error("advantages need a group of at least two rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double denom = estimator == StdEstimator::population ? n : n - 1.0;
  const double sd = std::sqrt(ss / denom);
  std::vector<double> adv(rewards.size(), 0.0);
  if (sd < kZeroStd) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

double clipped_surrogate(std::span<const TokenTrajectory> trajectories,
                         std::span<const double> advantages, double epsilon) {
  if (trajectories.size() != advantages.size())
    throw std::domain_error("advantages and trajectories differ in length");
  if (trajectories.empty()) throw std::domain_error("empty group");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::domain_error("epsilon must lie in (0, 1)");
  double total = 0.0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& tr = trajectories[i];
    const std::size_t len = tr.tokens.size();
    if (len == 0 || tr.logprob_old.size() != len || tr.logprob_new.size() != len)
      throw std::domain_error("trajectory arrays differ in length");
    const double a = advantages[i];
    double sum = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double r = std::exp(tr.logprob_new[t] - tr.logprob_old[t]);
      const double clipped = std::clamp(r, 1.0 - epsilon, 1.0 + epsilon);
      sum += std::min(r * a, clipped * a);
    }
    total += sum / static_cast<double>(len);
  }
  return total / static_cast<double>(trajectories.size());
}

PolicyTable::PolicyTable(std::size_t slots, std::size_t length, std::size_t vocab)
    : slots_(slots), length_(length), vocab_(vocab),
      logits_(slots * length * vocab, 0.0) {}

std::span<double> PolicyTable::row(std::size_t slot, std::size_t pos) {
  return std::span<double>(logits_).subspan((slot * length_ + pos) * vocab_, vocab_);
}

std::span<const double> PolicyTable::row(std::size_t slot, std::size_t pos) const {
  return std::span<const double>(logits_).subspan((slot * length_ + pos) * vocab_,
                                                  vocab_);
}

void policy_distribution(const PolicyTable& table, std::size_t slot,
                         std::span<const double> base_logits, std::size_t pos,
                         double tau, std::span<double> out) {
  const auto learned = table.row(slot, pos);
  std::vector<double> z(learned.begin(), learned.end());
  if (!base_logits.empty()) {
    const auto base = base_logits.subspan(pos * table.vocab(), table.vocab());
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += base[j];
  }
  softmax_into(z, tau, out);
}

void score_trajectories(const PolicyTable& table, GroupExperience& group) {
  check_group(group, table);
  std::vector<double> p(table.vocab());
  for (std::size_t pos = 0; pos < table.length(); ++pos) {
    policy_distribution(table, group.slot, group.base_logits, pos,
                        group.temperature, p);
    for (auto& tr : group.trajectories) {
      if (tr.logprob_new.size() != tr.tokens.size())
        tr.logprob_new.assign(tr.tokens.size(), 0.0);
      if (pos < tr.tokens.size())
        tr.logprob_new[pos] = std::log(p[static_cast<std::size_t>(tr.tokens[pos])]);
    }
  }
}

double entropy_bonus(const PolicyTable& table,
                     std::span<const GroupExperience> groups, double lambda) {
  if (!(lambda >= 0.0)) throw std::domain_error("lambda must be >= 0");
  if (lambda == 0.0) return 0.0;
  const std::size_t n_tokens = batch_token_count(groups);
  if (n_tokens == 0) return 0.0;
  std::vector<double> p(table.vocab());
  double sum = 0.0;
  for (const auto& g : groups) {
    check_group(g, table);
    for (std::size_t pos = 0; pos < table.length(); ++pos) {
      std::size_t uses = 0;
      for (const auto& tr : g.trajectories) uses += pos < tr.tokens.size() ? 1 : 0;
      if (uses == 0) continue;
      policy_distribution(table, g.slot, g.base_logits, pos, g.temperature, p);
      sum += static_cast<double>(uses) * entropy_of(p);
    }
  }
  return lambda * sum / static_cast<double>(n_tokens);
}

double batch_objective(const PolicyTable& table,
                       std::span<const GroupExperience> groups,
                       const ObjectiveConfig& config) {
  if (groups.empty()) return 0.0;
  double total = 0.0;
  for (const auto& g : groups) {
    GroupExperience scored = g;
    score_trajectories(table, scored);
    total += clipped_surrogate(scored.trajectories, scored.advantages, config.epsilon);
  }
  return total / static_cast<double>(groups.size()) +
         entropy_bonus(table, groups, config.entropy_coef);
}

PolicyTable batch_gradient(const PolicyTable& table,
                           std::span<const GroupExperience> groups,
                           const ObjectiveConfig& config) {
  PolicyTable grad(table.slots(), table.length(), table.vocab());
  if (groups.empty()) return grad;
  const double group_weight = 1.0 / static_cast<double>(groups.size());
  const std::size_t n_tokens = batch_token_count(groups);
  const std::size_t vocab = table.vocab();
  std::vector<double> p(vocab);
  std::vector<double> token_coef(vocab);

  for (const auto& g : groups) {
    check_group(g, table);
    const double inv_tau = 1.0 / g.temperature;
    const double traj_weight =
        group_weight / static_cast<double>(std::max<std::size_t>(g.trajectories.size(), 1));
    for (std::size_t pos = 0; pos < table.length(); ++pos) {
      policy_distribution(table, g.slot, g.base_logits, pos, g.temperature, p);
      // d log pi(o) / d z_j = (1[j = o] - p_j) / tau, so the position's
      // gradient is (c_j - S p_j) / tau with c_j the coefficient mass on j.
      std::fill(token_coef.begin(), token_coef.end(), 0.0);
      double coef_sum = 0.0;
      std::size_t uses = 0;
      for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
        const auto& tr = g.trajectories[i];
        if (pos >= tr.tokens.size()) continue;
        ++uses;
        const auto tok = static_cast<std::size_t>(tr.tokens[pos]);
        const double logp_new = std::log(p[tok]);
        const double ratio = std::exp(logp_new - tr.logprob_old[pos]);
        const double slope =
            surrogate_ratio_slope(ratio, g.advantages[i], config.epsilon);
        if (slope == 0.0) continue;
        const double c =
            traj_weight / static_cast<double>(tr.tokens.size()) * slope * ratio;
        token_coef[tok] += c;
        coef_sum += c;
      }
      auto out = grad.row(g.slot, pos);
      for (std::size_t j = 0; j < vocab; ++j)
        out[j] += (token_coef[j] - coef_sum * p[j]) * inv_tau;

      if (config.entropy_coef > 0.0 && uses > 0 && n_tokens > 0) {
        // dH/du_j = -p_j (ln p_j + H)
        const double h = entropy_of(p);
        const double w = config.entropy_coef * static_cast<double>(uses) /
                         static_cast<double>(n_tokens);
        for (std::size_t j = 0; j < vocab; ++j) {
          const double lp = p[j] > 0.0 ? std::log(p[j]) : 0.0;
          out[j] += w * (-p[j] * (lp + h)) * inv_tau;
        }
      }
    }
  }
  return grad;
}

void policy_step(PolicyTable& table, std::span<const GroupExperience> groups,
                 double learning_rate, const ObjectiveConfig& config) {
  const PolicyTable grad = batch_gradient(table, groups, config);
  auto dst = table.data();
  const auto src = grad.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += learning_rate * src[i];
}

}  // namespace tgrpo
