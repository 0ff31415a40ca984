#pragma once

// The training loop: per step it allocates rollout budgets, samples at the
// scheduled temperature, feeds measured entropy back to the scheduler, takes
// one policy update and folds rewards into the difficulty records. Epoch ends
// re-rank the bank and widen the budget limits.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tgrpo/budget_allocator.hpp"
#include "tgrpo/grpo_core.hpp"
#include "tgrpo/synthetic_env.hpp"
#include "tgrpo/temp_scheduler.hpp"

namespace tgrpo {

enum class Mode { grpo, grpo_er, grpo_ts, grpo_ts_an, dapo_filter };

std::string_view mode_name(Mode mode);
/// Accepts "grpo", "grpo+er", "grpo+ts", "grpo+ts+an", "dapo_filter".
Mode parse_mode(std::string_view name);
bool uses_scheduler(Mode mode);

struct TrainConfig {
  Mode mode = Mode::grpo;
  bool dynamic_rollout = false;
  std::size_t batch_size = 32;
  int group_size = 8;
  int epochs = 3;
  double learning_rate = 40.0;
  double epsilon = 0.2;
  double entropy_coef = 1e-4;          // used by grpo+er only
  StdEstimator std_estimator = StdEstimator::population;
  /// Score the update at the sampling temperature (true) or at tau = 1.
  bool update_at_sampling_temperature = true;

  // Temperature control.
  double eta = 0.9;
  double anneal_start_fraction = 0.6;  // t_anneal = floor(fraction * t_max)
  double tau_init = 1.0;
  double tau_min = 0.25;
  double tau_max = 4.0;

  // Rollout budget limits.
  int widen_step = 2;
  int g_min_floor = 2;
  int g_max_ceiling = 16;
  std::size_t dapo_resample_factor = 10;   // cap = factor * batch_size questions

  // Banks.
  BankSpec bank;
  std::optional<std::size_t> easy_cap;  // unset: a fifth of the bank
  std::size_t probe_samples = 10;
  std::size_t eval_bank_size = 256;

  // Evaluation.
  std::uint64_t seed = 1;
  std::int64_t eval_interval = 0;      // 0: final evaluation only
  int eval_samples = 16;
  std::vector<int> eval_k = {1, 16};

  /// Throws ConfigError on the first violated invariant.
  void validate() const;
  std::size_t resolved_easy_cap() const;
  bool operator==(const TrainConfig&) const = default;
};

std::int64_t steps_per_epoch(std::size_t bank_size, std::size_t batch_size);

/// Scheduler settings implied by a config for a run of t_max steps.
SchedulerConfig scheduler_config(const TrainConfig& config, std::int64_t t_max);

struct TraceRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double tau = 0.0;
  double entropy = 0.0;
  double target_entropy = 0.0;
  double mean_reward = 0.0;
  double frac_all_incorrect = 0.0;
  double frac_all_correct = 0.0;
  int min_budget = 0;
  int max_budget = 0;
  std::int64_t rollouts_consumed = 0;
  int g_min = 0;
  int g_max = 0;
  bool skipped = false;                // dapo step with no valid group

  bool operator==(const TraceRecord&) const = default;
};

/// The DAPO filter's keep rule: the group's rewards are not all equal.
bool has_reward_spread(const RolloutGroup& group);

/// Unbiased 1 - C(n - c, k) / C(n, k). Throws std::domain_error unless
/// 0 <= c <= n and 1 <= k <= n.
double pass_at_k(int n, int c, int k);

struct PassAtKTable {
  std::int64_t step = 0;
  int n_samples = 0;
  std::vector<int> k_values;
  std::vector<double> pass;            // mean over questions, aligned with k_values
  std::vector<int> correct_counts;     // per question

  double at(int k) const;
};

/// Draws n_samples responses per question at tau and averages pass@k.
/// Question q uses the stream (seed, eval, q.id, stream_tag).
PassAtKTable evaluate(const PolicyTable& policy,
                      std::span<const SyntheticQuestion> bank, int n_samples,
                      std::span<const int> k_values, double tau,
                      std::uint64_t seed, std::uint64_t stream_tag = 0);

struct TrainResult {
  PolicyTable policy;
  std::vector<TraceRecord> trace;
  std::vector<PassAtKTable> evals;     // the last one is the final evaluation
  std::vector<DifficultyRecord> records;
  std::size_t train_bank_size = 0;
  std::int64_t t_max = 0;
  std::optional<double> h_init;
  std::vector<std::int64_t> skipped_steps;
};

struct TrainHooks {
  std::function<void(const TraceRecord&)> on_step;
  std::function<void(const std::string&)> on_log;
};

/// Full, deterministic training run.
TrainResult run(const TrainConfig& config, const TrainHooks& hooks = {});

/// The run's banks and contexts, exactly as run() builds them.
struct RunBanks {
  std::vector<TaskContext> contexts;
  std::vector<SyntheticQuestion> train;
  std::vector<SyntheticQuestion> eval;
};
RunBanks build_banks(const TrainConfig& config);

}  // namespace tgrpo
