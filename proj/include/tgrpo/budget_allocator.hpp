#pragma once

// Difficulty tracking from cumulative rewards and redistribution of a fixed
// per-batch rollout budget from easy to hard questions.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace tgrpo {

struct DifficultyRecord {
  std::int64_t question_id = 0;
  std::int64_t n_c = 0;      // cumulative rollouts
  double r_c = 0.0;          // cumulative reward
  std::optional<double> k;   // normalized rank in (0, 1]; larger is harder

  double average_reward() const { return r_c / static_cast<double>(n_c); }
};

/// Adds one group's rollouts. Requires num_rollouts >= 1 and
/// 0 <= total_reward <= num_rollouts.
void accumulate(DifficultyRecord& record, std::int64_t num_rollouts,
                double total_reward);

/// Sorts by average reward descending (ties: ascending question_id) and sets
/// k = rank / |D|. Records keep their positions. Throws StateError if any
/// record has no rollouts.
void rank_dataset(std::span<DifficultyRecord> records);

struct BudgetLimits {
  int g_default = 8;
  int g_min = 8;
  int g_max = 8;
  int widen_step = 2;
  int g_min_floor = 2;
  int g_max_ceiling = 16;

  /// 1 <= g_min_floor <= g_min <= g_default <= g_max <= g_max_ceiling.
  void validate() const;
};

/// Starting limits (G_min = G_max = G) for a default budget.
BudgetLimits initial_limits(int g_default, int widen_step, int g_min_floor,
                            int g_max_ceiling);

/// Per-question rollout budgets for a batch with ranks `ks`. The total is
/// always ks.size() * g_default and every budget lies in [g_min, g_max].
std::vector<int> allocate_budgets(std::span<const double> ks,
                                  const BudgetLimits& limits);

/// Limits after `completed_iterations` passes over the dataset.
BudgetLimits widen_limits(const BudgetLimits& limits, int completed_iterations);

}  // namespace tgrpo
