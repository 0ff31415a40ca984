#pragma once

// Group-relative advantages, the clipped token-level surrogate (no KL term),
// the entropy bonus, and their analytic gradients for a tabular softmax policy.

#include <cstdint>
#include <span>
#include <vector>

namespace tgrpo {

enum class StdEstimator { population, sample };

/// (r_i - mean) / std within a group; all zeros when std < 1e-8.
/// Throws std::domain_error for fewer than two rewards.
std::vector<double> group_advantages(std::span<const double> rewards,
                                     StdEstimator estimator = StdEstimator::population);

struct TokenTrajectory {
  std::int64_t question_id = 0;
  std::vector<int> tokens;
  std::vector<double> logprob_old;   // log pi_old(o_t | context), <= 0
  std::vector<double> logprob_new;   // log pi_theta(o_t | context), <= 0
  double reward = 0.0;
};

/// (1/G) sum_i (1/|o_i|) sum_t min(r A_i, clip(r, 1-eps, 1+eps) A_i) with
/// r = exp(logprob_new - logprob_old).
double clipped_surrogate(std::span<const TokenTrajectory> trajectories,
                         std::span<const double> advantages, double epsilon);

/// Learned logits indexed by (slot, position, token). A question reads the
/// slot of its context; its effective logits are its fixed base logits plus
/// the slot's row.
class PolicyTable {
 public:
  PolicyTable() = default;
  PolicyTable(std::size_t slots, std::size_t length, std::size_t vocab);

  std::size_t slots() const { return slots_; }
  std::size_t length() const { return length_; }
  std::size_t vocab() const { return vocab_; }

  std::span<double> row(std::size_t slot, std::size_t pos);
  std::span<const double> row(std::size_t slot, std::size_t pos) const;
  std::span<double> data() { return logits_; }
  std::span<const double> data() const { return logits_; }

  bool operator==(const PolicyTable&) const = default;

 private:
  std::size_t slots_ = 0;
  std::size_t length_ = 0;
  std::size_t vocab_ = 0;
  std::vector<double> logits_;
};

/// One question's experience for an update.
struct GroupExperience {
  std::size_t slot = 0;
  std::span<const double> base_logits;   // length * vocab, may be empty
  double temperature = 1.0;              // tau at which probabilities are taken
  std::vector<TokenTrajectory> trajectories;
  std::vector<double> advantages;
};

struct ObjectiveConfig {
  double epsilon = 0.2;
  double entropy_coef = 0.0;   // lambda; 0 gives the plain surrogate
};

/// Per-position sampling distribution softmax((base + row) / tau).
void policy_distribution(const PolicyTable& table, std::size_t slot,
                         std::span<const double> base_logits, std::size_t pos,
                         double tau, std::span<double> out);

/// Recomputes logprob_new of every trajectory from the table.
void score_trajectories(const PolicyTable& table, GroupExperience& group);

/// lambda times the mean per-token entropy of the policy over all sampled
/// tokens of the batch.
double entropy_bonus(const PolicyTable& table,
                     std::span<const GroupExperience> groups, double lambda);

/// Mean over groups of clipped_surrogate, plus the entropy bonus.
double batch_objective(const PolicyTable& table,
                       std::span<const GroupExperience> groups,
                       const ObjectiveConfig& config);

/// Analytic gradient of batch_objective with respect to the table. Where the
/// min selects an active clip (including ties at the clip boundary) the token
/// contributes no ratio gradient.
PolicyTable batch_gradient(const PolicyTable& table,
                           std::span<const GroupExperience> groups,
                           const ObjectiveConfig& config);

/// One gradient-ascent step: table += learning_rate * gradient.
void policy_step(PolicyTable& table, std::span<const GroupExperience> groups,
                 double learning_rate, const ObjectiveConfig& config);

}  // namespace tgrpo
