#include "tgrpo/budget_allocator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tgrpo/errors.hpp"

namespace tgrpo {

void accumulate(DifficultyRecord& record, std::int64_t num_rollouts,
                double total_reward) {
  if (num_rollouts < 1) throw std::domain_error("num_rollouts must be >= 1");
  if (!(total_reward >= 0.0 && total_reward <= static_cast<double>(num_rollouts)))
    throw std::domain_error("total_reward must lie in [0, num_rollouts]");
  record.n_c += num_rollouts;
  record.r_c += total_reward;
}

void rank_dataset(std::span<DifficultyRecord> records) {
  for (const auto& r : records)
    if (r.n_c < 1)
      throw StateError("question " + std::to_string(r.question_id) +
                       " has no rollouts; ranking undefined");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = records[a].average_reward();
    const double rb = records[b].average_reward();
    if (ra != rb) return ra > rb;
    return records[a].question_id < records[b].question_id;
  });
  const double n = static_cast<double>(records.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    records[order[rank]].k = static_cast<double>(rank + 1) / n;
}

void BudgetLimits::validate() const {
  if (!(1 <= g_min_floor && g_min_floor <= g_min && g_min <= g_default &&
        g_default <= g_max && g_max <= g_max_ceiling))
    throw ConfigError(
        "budget limits must satisfy 1 <= g_min_floor <= g_min <= G <= g_max "
        "<= g_max_ceiling");
  if (widen_step < 0) throw ConfigError("widen_step must be >= 0");
}

BudgetLimits initial_limits(int g_default, int widen_step, int g_min_floor,
                            int g_max_ceiling) {
  BudgetLimits l;
  l.g_default = g_default;
  l.g_min = g_default;
  l.g_max = g_default;
  l.widen_step = widen_step;
  l.g_min_floor = g_min_floor;
  l.g_max_ceiling = g_max_ceiling;
  return l;
}

std::vector<int> allocate_budgets(std::span<const double> ks,
                                  const BudgetLimits& limits) {
  if (limits.g_default > limits.g_max || limits.g_min > limits.g_default ||
      limits.g_min < 1)
    throw ConfigError("infeasible budget limits");
  if (ks.empty()) throw std::domain_error("empty batch");
  double k_sum = 0.0;
  for (double k : ks) {
    if (!(k > 0.0 && k <= 1.0)) throw std::domain_error("rank k must lie in (0, 1]");
    k_sum += k;
  }

  const std::int64_t batch = static_cast<std::int64_t>(ks.size());
  const std::int64_t total = batch * limits.g_default;
  std::vector<int> budgets(ks.size(), limits.g_min);
  const std::int64_t remaining = total - batch * limits.g_min;

  // Proportional floor shares. The epsilon keeps mathematically integral
  // shares (e.g. equal k) from flooring one below through rounding.
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double share = static_cast<double>(remaining) * (ks[i] / k_sum);
    auto extra = static_cast<std::int64_t>(std::floor(share + 1e-9));
    extra = std::min<std::int64_t>(extra, limits.g_max - limits.g_min);
    budgets[i] += static_cast<int>(extra);
    assigned += extra;
  }
  if (assigned > remaining) {
    // Only reachable if the epsilon rounded several shares up; fall back to
    // exact floors.
    assigned = 0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      auto extra = static_cast<std::int64_t>(
          std::floor(static_cast<double>(remaining) * (ks[i] / k_sum)));
      extra = std::min<std::int64_t>(extra, limits.g_max - limits.g_min);
      budgets[i] = limits.g_min + static_cast<int>(extra);
      assigned += extra;
    }
  }

  // Greedy leftover: +1 per question per pass in descending k, capped at g_max.
  std::vector<std::size_t> order(ks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ks[a] > ks[b]; });
  std::int64_t leftover = remaining - assigned;
  while (leftover > 0) {
    bool granted = false;
    for (std::size_t i : order) {
      if (leftover == 0) break;
      if (budgets[i] < limits.g_max) {
        ++budgets[i];
        --leftover;
        granted = true;
      }
    }
    if (!granted) throw ConfigError("budget cannot be placed under g_max");
  }
  return budgets;
}

BudgetLimits widen_limits(const BudgetLimits& limits, int completed_iterations) {
  if (completed_iterations < 0)
    throw std::domain_error("completed_iterations must be >= 0");
  BudgetLimits out = limits;
  const std::int64_t shift =
      static_cast<std::int64_t>(limits.widen_step) * completed_iterations;
  out.g_max = static_cast<int>(std::min<std::int64_t>(
      limits.g_default + shift, limits.g_max_ceiling));
  out.g_min = static_cast<int>(std::max<std::int64_t>(
      limits.g_default - shift, limits.g_min_floor));
  return out;
}

}  // namespace tgrpo
