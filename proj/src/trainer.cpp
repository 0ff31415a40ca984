#include "tgrpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tgrpo/errors.hpp"
#include "tgrpo/rng.hpp"

namespace tgrpo {
namespace {

constexpr std::int64_t kEvalIdBase = 1'000'000;

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(v.size() - i));
    std::swap(v[i], v[j]);
  }
}

// C(n, k) when it fits in 128 bits.
std::optional<unsigned __int128> binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    const auto num = static_cast<unsigned __int128>(n - k + i);
    if (r > (~static_cast<unsigned __int128>(0)) / num) return std::nullopt;
    r = r * num / static_cast<unsigned __int128>(i);
  }
  return r;
}

struct BatchStats {
  double entropy_sum = 0.0;
  std::int64_t tokens = 0;
  double reward_sum = 0.0;
  std::int64_t rollouts = 0;
  std::size_t groups = 0;
  std::size_t all_incorrect = 0;
  std::size_t all_correct = 0;

  void add(const RolloutGroup& g) {
    for (const auto& row : g.entropies)
      for (double h : row) {
        entropy_sum += h;
        ++tokens;
      }
    reward_sum += g.reward_sum();
    rollouts += static_cast<std::int64_t>(g.size());
    ++groups;
    all_incorrect += g.all_incorrect() ? 1 : 0;
    all_correct += g.all_correct() ? 1 : 0;
  }
  double mean_entropy() const { return entropy_sum / static_cast<double>(tokens); }
};

GroupExperience to_experience(const PolicyTable& policy, const SyntheticQuestion& q,
                              const RolloutGroup& g, double update_tau,
                              StdEstimator estimator) {
  GroupExperience e;
  e.slot = q.context;
  e.base_logits = q.base_logits;
  e.temperature = update_tau;
  e.advantages = group_advantages(g.rewards, estimator);
  for (std::size_t i = 0; i < g.size(); ++i) {
    TokenTrajectory tr;
    tr.question_id = q.id;
    tr.tokens = g.responses[i];
    tr.logprob_old = g.logprobs[i];
    tr.reward = g.rewards[i];
    e.trajectories.push_back(std::move(tr));
  }
  // The snapshot is the current table, so pi_old is the policy itself at the
  // update temperature.
  score_trajectories(policy, e);
  if (update_tau != g.temperature)
    for (auto& tr : e.trajectories) tr.logprob_old = tr.logprob_new;
  return e;
}

}  // namespace

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::grpo: return "grpo";
    case Mode::grpo_er: return "grpo+er";
    case Mode::grpo_ts: return "grpo+ts";
    case Mode::grpo_ts_an: return "grpo+ts+an";
    case Mode::dapo_filter: return "dapo_filter";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  for (Mode m : {Mode::grpo, Mode::grpo_er, Mode::grpo_ts, Mode::grpo_ts_an,
                 Mode::dapo_filter})
    if (mode_name(m) == name) return m;
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

bool uses_scheduler(Mode mode) {
  return mode == Mode::grpo_ts || mode == Mode::grpo_ts_an;
}

std::size_t TrainConfig::resolved_easy_cap() const {
  return easy_cap.value_or(bank.size / 5);
}

void TrainConfig::validate() const {
  bank.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (group_size < 2) throw ConfigError("group_size must be >= 2");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (!(entropy_coef >= 0.0)) throw ConfigError("entropy_coef must be >= 0");
  if (!(anneal_start_fraction > 0.0 && anneal_start_fraction < 1.0))
    throw ConfigError("anneal_start_fraction must lie in (0, 1)");
  if (g_min_floor < 2) throw ConfigError("g_min_floor must be >= 2");
  initial_limits(group_size, widen_step, g_min_floor, g_max_ceiling).validate();
  if (widen_step < 0) throw ConfigError("widen_step must be >= 0");
  if (dapo_resample_factor < 1) throw ConfigError("dapo_resample_factor must be >= 1");
  if (mode == Mode::dapo_filter && dynamic_rollout)
    throw ConfigError("dapo_filter does not combine with dynamic_rollout");
  if (resolved_easy_cap() > bank.size) throw ConfigError("easy_cap exceeds bank size");
  if (probe_samples < 1) throw ConfigError("probe_samples must be >= 1");
  if (eval_bank_size < 1) throw ConfigError("eval_bank_size must be >= 1");
  if (eval_interval < 0) throw ConfigError("eval_interval must be >= 0");
  if (eval_samples < 1) throw ConfigError("eval_samples must be >= 1");
  if (eval_k.empty()) throw ConfigError("eval_k must not be empty");
  for (int k : eval_k)
    if (k < 1 || k > eval_samples)
      throw ConfigError("every eval k must lie in [1, eval_samples]");
  // Scheduler invariants for the smallest possible run.
  SchedulerConfig s = scheduler_config(*this, std::max<std::int64_t>(
                                                  2, epochs * steps_per_epoch(1, 1)));
  s.annealing_enabled = false;
  s.validate();
}

std::int64_t steps_per_epoch(std::size_t bank_size, std::size_t batch_size) {
  return static_cast<std::int64_t>((bank_size + batch_size - 1) / batch_size);
}

SchedulerConfig scheduler_config(const TrainConfig& config, std::int64_t t_max) {
  SchedulerConfig s;
  s.eta = config.eta;
  s.t_max = t_max;
  s.t_anneal = static_cast<std::int64_t>(
      std::floor(config.anneal_start_fraction * static_cast<double>(t_max)));
  s.vocab_size = static_cast<std::int64_t>(config.bank.vocab_size);
  s.tau_init = config.tau_init;
  s.tau_min = config.tau_min;
  s.tau_max = config.tau_max;
  s.annealing_enabled = config.mode == Mode::grpo_ts_an;
  return s;
}

bool has_reward_spread(const RolloutGroup& group) {
  return std::any_of(group.rewards.begin(), group.rewards.end(),
                     [&](double r) { return r != group.rewards.front(); });
}

double pass_at_k(int n, int c, int k) {
  if (n < 1 || c < 0 || c > n) throw std::domain_error("need 0 <= c <= n and n >= 1");
  if (k < 1 || k > n) throw std::domain_error("need 1 <= k <= n");
  if (n - c < k) return 1.0;
  const auto total = binomial(n, k);
  const auto miss = binomial(n - c, k);
  if (total && miss)
    return static_cast<double>(*total - *miss) / static_cast<double>(*total);
  double miss_prob = 1.0;
  for (int i = n - c + 1; i <= n; ++i)
    miss_prob *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
  return 1.0 - miss_prob;
}

double PassAtKTable::at(int k) const {
  for (std::size_t i = 0; i < k_values.size(); ++i)
    if (k_values[i] == k) return pass[i];
  throw std::out_of_range("pass@" + std::to_string(k) + " was not evaluated");
}

PassAtKTable evaluate(const PolicyTable& policy,
                      std::span<const SyntheticQuestion> bank, int n_samples,
                      std::span<const int> k_values, double tau,
                      std::uint64_t seed, std::uint64_t stream_tag) {
  for (int k : k_values)
    if (k < 1 || k > n_samples) throw std::domain_error("k must lie in [1, n_samples]");
  if (bank.empty()) throw std::domain_error("evaluation bank is empty");
  PassAtKTable table;
  table.n_samples = n_samples;
  table.k_values.assign(k_values.begin(), k_values.end());
  table.pass.assign(k_values.size(), 0.0);
  for (const auto& q : bank) {
    Rng rng = make_stream(seed, Stream::eval, static_cast<std::uint64_t>(q.id), stream_tag);
    const RolloutGroup g = rollout(policy, q, n_samples, tau, rng);
    const int c = static_cast<int>(g.reward_sum());
    table.correct_counts.push_back(c);
    for (std::size_t i = 0; i < k_values.size(); ++i)
      table.pass[i] += pass_at_k(n_samples, c, k_values[i]);
  }
  for (double& p : table.pass) p /= static_cast<double>(bank.size());
  return table;
}

RunBanks build_banks(const TrainConfig& config) {
  RunBanks banks;
  Rng family = make_stream(config.seed, Stream::family);
  banks.contexts = generate_contexts(config.bank, family);

  Rng train_rng = make_stream(config.seed, Stream::train_bank);
  auto train = generate_bank(config.bank, banks.contexts, train_rng, 0);
  const PolicyTable probe(config.bank.num_contexts, config.bank.answer_length,
                          config.bank.vocab_size);
  Rng balance_rng = make_stream(config.seed, Stream::balance);
  banks.train = assess_and_balance(std::move(train), probe, config.probe_samples,
                                   config.resolved_easy_cap(), balance_rng);

  BankSpec eval_spec = config.bank;
  eval_spec.size = config.eval_bank_size;
  Rng eval_rng = make_stream(config.seed, Stream::eval_bank);
  banks.eval = generate_bank(eval_spec, banks.contexts, eval_rng, kEvalIdBase);
  return banks;
}

TrainResult run(const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  auto log = [&](const std::string& msg) {
    if (hooks.on_log) hooks.on_log(msg);
  };

  const RunBanks banks = build_banks(config);
  const auto& bank = banks.train;
  const std::size_t n = bank.size();
  const std::size_t B = config.batch_size;
  const int G = config.group_size;
  const std::uint64_t seed = config.seed;

  TrainResult result;
  result.train_bank_size = n;
  result.t_max = config.epochs * steps_per_epoch(n, B);
  result.policy = PolicyTable(config.bank.num_contexts, config.bank.answer_length,
                              config.bank.vocab_size);
  PolicyTable& policy = result.policy;

  const SchedulerConfig sched = scheduler_config(config, result.t_max);
  if (sched.annealing_enabled) sched.validate();
  SchedulerState state = initial_state(sched);
  const bool scheduled = uses_scheduler(config.mode);

  ObjectiveConfig objective;
  objective.epsilon = config.epsilon;
  objective.entropy_coef = config.mode == Mode::grpo_er ? config.entropy_coef : 0.0;

  std::vector<DifficultyRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) records[i].question_id = bank[i].id;

  const BudgetLimits base_limits =
      initial_limits(G, config.widen_step, config.g_min_floor, config.g_max_ceiling);
  BudgetLimits limits = base_limits;
  std::optional<double> h_init;
  std::int64_t t = 0;

  auto maybe_evaluate = [&](bool final_eval) {
    const bool periodic = config.eval_interval > 0 && t % config.eval_interval == 0;
    if (!final_eval && !periodic) return;
    if (!result.evals.empty() && result.evals.back().step == t) return;
    PassAtKTable table = evaluate(policy, banks.eval, config.eval_samples, config.eval_k,
                                  1.0, seed, static_cast<std::uint64_t>(t));
    table.step = t;
    result.evals.push_back(std::move(table));
  };

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = make_stream(seed, Stream::shuffle, static_cast<std::uint64_t>(epoch));
    shuffle_indices(order, shuffle_rng);
    const bool allocate = config.dynamic_rollout && epoch > 1;

    for (std::size_t start = 0; start < n; start += B) {
      ++t;
      const std::vector<std::size_t> batch(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + B)));
      const double tau = scheduled ? state.tau : config.tau_init;
      const double update_tau = config.update_at_sampling_temperature ? tau : 1.0;

      std::vector<int> budgets(batch.size(), G);
      if (allocate) {
        std::vector<double> ks;
        for (std::size_t i : batch) ks.push_back(records[i].k.value());
        budgets = allocate_budgets(ks, limits);
      }

      BatchStats stats;
      std::vector<GroupExperience> groups;
      auto sample = [&](std::size_t idx, int budget, std::uint64_t attempt) {
        Rng rng = make_stream(seed, Stream::rollout, static_cast<std::uint64_t>(bank[idx].id),
                              static_cast<std::uint64_t>(t), attempt);
        RolloutGroup g = rollout(policy, bank[idx], budget, tau, rng);
        stats.add(g);
        accumulate(records[idx], static_cast<std::int64_t>(g.size()), g.reward_sum());
        return g;
      };

      if (config.mode == Mode::dapo_filter) {
        const std::size_t cap = config.dapo_resample_factor * B;
        Rng pick = make_stream(seed, Stream::dapo, static_cast<std::uint64_t>(t));
        std::vector<std::uint64_t> attempts(n, 0);
        std::size_t drawn = 0;
        while (groups.size() < B && drawn < cap) {
          const std::size_t idx =
              drawn < batch.size()
                  ? batch[drawn]
                  : static_cast<std::size_t>(uniform01(pick) * static_cast<double>(n));
          ++drawn;
          RolloutGroup g = sample(idx, G, attempts[idx]++);
          if (!has_reward_spread(g)) continue;
          groups.push_back(
              to_experience(policy, bank[idx], g, update_tau, config.std_estimator));
        }
      } else {
        for (std::size_t j = 0; j < batch.size(); ++j) {
          RolloutGroup g = sample(batch[j], budgets[j], 0);
          groups.push_back(
              to_experience(policy, bank[batch[j]], g, update_tau, config.std_estimator));
        }
      }

      const double h_t = stats.mean_entropy();
      if (!h_init) h_init = h_t;
      double target = *h_init;
      if (scheduled) {
        if (t == 1) state = observe_first_batch(state, h_t);
        target = target_entropy(sched, *state.h_init, t);
        state = step_temperature(state, sched, h_t, t);
      }

      TraceRecord rec;
      rec.step = t;
      rec.epoch = epoch;
      rec.tau = tau;
      rec.entropy = h_t;
      rec.target_entropy = target;
      rec.mean_reward = stats.reward_sum / static_cast<double>(stats.rollouts);
      rec.frac_all_incorrect =
          static_cast<double>(stats.all_incorrect) / static_cast<double>(stats.groups);
      rec.frac_all_correct =
          static_cast<double>(stats.all_correct) / static_cast<double>(stats.groups);
      rec.min_budget = config.mode == Mode::dapo_filter
                           ? G : *std::min_element(budgets.begin(), budgets.end());
      rec.max_budget = config.mode == Mode::dapo_filter
                           ? G : *std::max_element(budgets.begin(), budgets.end());
      rec.rollouts_consumed = stats.rollouts;
      rec.g_min = allocate ? limits.g_min : G;
      rec.g_max = allocate ? limits.g_max : G;

      if (groups.empty()) {
        rec.skipped = true;
        result.skipped_steps.push_back(t);
        log("step " + std::to_string(t) + ": no group with nonzero reward spread, update skipped");
      } else {
        policy_step(policy, groups, config.learning_rate, objective);
      }
      result.trace.push_back(rec);
      if (hooks.on_step) hooks.on_step(rec);
      maybe_evaluate(false);
    }

    if (config.dynamic_rollout) {
      rank_dataset(records);
      limits = widen_limits(base_limits, epoch);
    }
  }
  maybe_evaluate(true);

  result.records = std::move(records);
  result.h_init = h_init;
  return result;
}

}  // namespace tgrpo
