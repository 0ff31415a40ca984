#pragma once

// A fully observable stand-in for math questions. Each question asks for one
// of a few accepted token sequences; its fixed base logits place an informative
// outlier and a runner-up over Gaussian noise at every position, and latent
// difficulty is the chance that the outlier is a distractor instead of the
// accepted token. Questions are grouped into contexts that share answer
// structure, so what the policy learns on one question carries to its
// siblings, including held-out ones.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tgrpo/grpo_core.hpp"
#include "tgrpo/rng.hpp"

namespace tgrpo {

struct BankSpec {
  std::size_t size = 512;
  std::size_t vocab_size = 64;
  std::size_t answer_length = 4;
  std::size_t num_answers = 2;          // accepted answers per question
  std::size_t num_contexts = 16;
  std::size_t branch_candidates = 4;    // alternative tokens at the branch position
  double candidate_skew = 0.5;          // popularity of candidate i is skew^i
  double outlier_logit = 7.0;
  double runner_up_logit = 4.0;
  double noise_std = 0.5;
  double difficulty_min = 0.0;          // latent difficulty ~ U[min, max]
  double difficulty_max = 0.4;

  void validate() const;
  bool operator==(const BankSpec&) const = default;

  /// Logit advantage of the accepted token when it holds the outlier.
  double gap_max() const { return outlier_logit - runner_up_logit; }
  /// ... and when the distractor holds it.
  double gap_min() const { return runner_up_logit - outlier_logit; }
};

/// Answer structure shared by the questions of one context: a base sequence
/// whose token at `branch_position` may be any of `candidates`.
struct TaskContext {
  std::vector<int> base_answer;
  std::size_t branch_position = 0;
  std::vector<int> candidates;
};

struct SyntheticQuestion {
  std::int64_t id = 0;
  std::size_t context = 0;
  std::vector<std::vector<int>> accepted_answers;
  double latent_difficulty = 0.0;
  double init_gap = 0.0;               // expected accepted-token logit margin
  std::vector<double> base_logits;     // answer_length * vocab_size
};

std::vector<TaskContext> generate_contexts(const BankSpec& spec, Rng& rng);

/// gap_max - difficulty * (gap_max - gap_min).
double init_gap_for(const BankSpec& spec, double difficulty);

/// Draws spec.size questions with ids first_id, first_id + 1, ...
std::vector<SyntheticQuestion> generate_bank(const BankSpec& spec,
                                             std::span<const TaskContext> contexts,
                                             Rng& rng, std::int64_t first_id = 0);

/// 1 iff the response is one of the accepted answers.
int rule_reward(std::span<const int> response, const SyntheticQuestion& question);

struct RolloutGroup {
  std::int64_t question_id = 0;
  double temperature = 1.0;
  std::vector<std::vector<int>> responses;
  std::vector<std::vector<double>> logprobs;    // per token, at temperature
  std::vector<std::vector<double>> entropies;   // per token sampling entropy
  std::vector<double> rewards;

  std::size_t size() const { return responses.size(); }
  double reward_sum() const;
  bool all_incorrect() const;
  bool all_correct() const;
};

/// Samples `budget` responses token by token from softmax(logits / tau).
RolloutGroup rollout(const PolicyTable& policy, const SyntheticQuestion& question,
                     int budget, double tau, Rng& rng);

/// Probes every question `samples_per_question` times at tau = 1 and keeps at
/// most `easy_cap` of those answered correctly every time (chosen uniformly at
/// random); the rest are kept unchanged, in order.
std::vector<SyntheticQuestion> assess_and_balance(
    std::vector<SyntheticQuestion> bank, const PolicyTable& probe_policy,
    std::size_t samples_per_question, std::size_t easy_cap, Rng& rng);

/// One JSON object per line: id, context, difficulty, init_gap, accepted, base_logits.
void export_bank(std::span<const SyntheticQuestion> bank, std::ostream& out);
std::vector<SyntheticQuestion> import_bank(std::istream& in);

}  // namespace tgrpo
