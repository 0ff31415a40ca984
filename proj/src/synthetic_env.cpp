#include "tgrpo/synthetic_env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "tgrpo/errors.hpp"
#include "tgrpo/softmax_entropy.hpp"

namespace tgrpo {
namespace {

int uniform_token(std::size_t vocab, Rng& rng) {
  return static_cast<int>(uniform01(rng) * static_cast<double>(vocab));
}

}  // namespace

void BankSpec::validate() const {
  if (size < 1) throw ConfigError("bank size must be >= 1");
  if (vocab_size < 3) throw ConfigError("vocab_size must be >= 3");
  if (answer_length < 1) throw ConfigError("answer_length must be >= 1");
  if (num_contexts < 1) throw ConfigError("num_contexts must be >= 1");
  if (num_answers < 1) throw ConfigError("num_answers must be >= 1");
  if (branch_candidates < num_answers)
    throw ConfigError("branch_candidates must be >= num_answers");
  if (branch_candidates + 1 > vocab_size)
    throw ConfigError("branch_candidates must leave room for a distractor");
  if (!(candidate_skew > 0.0)) throw ConfigError("candidate_skew must be positive");
  if (!(outlier_logit > runner_up_logit))
    throw ConfigError("outlier_logit must exceed runner_up_logit");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  if (!(0.0 <= difficulty_min && difficulty_min <= difficulty_max &&
        difficulty_max <= 1.0))
    throw ConfigError("difficulty range must lie within [0, 1]");
}

std::vector<TaskContext> generate_contexts(const BankSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<TaskContext> contexts(spec.num_contexts);
  for (auto& c : contexts) {
    c.base_answer.resize(spec.answer_length);
    for (int& tok : c.base_answer) tok = uniform_token(spec.vocab_size, rng);
    c.branch_position = static_cast<std::size_t>(
        uniform01(rng) * static_cast<double>(spec.answer_length));
    std::vector<int> pool(spec.vocab_size);
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates for distinct candidates.
    for (std::size_t i = 0; i < spec.branch_candidates; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(uniform01(rng) *
                                       static_cast<double>(pool.size() - i));
      std::swap(pool[i], pool[j]);
      c.candidates.push_back(pool[i]);
    }
  }
  return contexts;
}

double init_gap_for(const BankSpec& spec, double difficulty) {
  return spec.gap_max() - difficulty * (spec.gap_max() - spec.gap_min());
}

std::vector<SyntheticQuestion> generate_bank(const BankSpec& spec,
                                             std::span<const TaskContext> contexts,
                                             Rng& rng, std::int64_t first_id) {
  spec.validate();
  if (contexts.size() != spec.num_contexts)
    throw ConfigError("context count does not match the bank spec");
  const std::size_t L = spec.answer_length;
  const std::size_t V = spec.vocab_size;

  std::vector<SyntheticQuestion> bank(spec.size);
  for (std::size_t qi = 0; qi < spec.size; ++qi) {
    auto& q = bank[qi];
    q.id = first_id + static_cast<std::int64_t>(qi);
    q.context = qi % spec.num_contexts;
    const TaskContext& ctx = contexts[q.context];
    q.latent_difficulty =
        spec.difficulty_min +
        (spec.difficulty_max - spec.difficulty_min) * uniform01(rng);
    q.init_gap = init_gap_for(spec, q.latent_difficulty);

    // Weighted draw of distinct branch candidates.
    std::vector<double> weight(spec.branch_candidates);
    for (std::size_t i = 0; i < weight.size(); ++i)
      weight[i] = std::pow(spec.candidate_skew, static_cast<double>(i));
    std::vector<int> picked;
    for (std::size_t a = 0; a < spec.num_answers; ++a) {
      const std::size_t i = sample_index(weight, rng);
      picked.push_back(ctx.candidates[i]);
      weight[i] = 0.0;
    }
    for (int tok : picked) {
      std::vector<int> answer = ctx.base_answer;
      answer[ctx.branch_position] = tok;
      q.accepted_answers.push_back(std::move(answer));
    }

    // Exactly floor(d * L + u) misled positions: the expected rate is d with
    // far less spread between questions than independent per-position draws.
    const auto misled_count = static_cast<std::size_t>(
        q.latent_difficulty * static_cast<double>(L) + uniform01(rng));
    std::vector<std::size_t> positions(L);
    std::iota(positions.begin(), positions.end(), 0);
    for (std::size_t i = 0; i < misled_count; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(L - i));
      std::swap(positions[i], positions[j]);
    }
    std::vector<bool> misled_at(L, false);
    for (std::size_t i = 0; i < std::min(misled_count, L); ++i)
      misled_at[positions[i]] = true;

    q.base_logits.assign(L * V, 0.0);
    for (std::size_t pos = 0; pos < L; ++pos) {
      std::span<double> row(q.base_logits.data() + pos * V, V);
      for (double& z : row) z = spec.noise_std * standard_normal(rng);
      std::vector<int> accepted;
      if (pos == ctx.branch_position)
        accepted = picked;
      else
        accepted.push_back(ctx.base_answer[pos]);
      const bool misled = misled_at[pos];
      int distractor = uniform_token(V, rng);
      while (std::find(accepted.begin(), accepted.end(), distractor) != accepted.end())
        distractor = uniform_token(V, rng);
      for (int tok : accepted)
        row[static_cast<std::size_t>(tok)] = misled ? spec.runner_up_logit : spec.outlier_logit;
      row[static_cast<std::size_t>(distractor)] =
          misled ? spec.outlier_logit : spec.runner_up_logit;
    }
  }
  return bank;
}

int rule_reward(std::span<const int> response, const SyntheticQuestion& question) {
  if (question.accepted_answers.empty())
    throw std::domain_error("question has no accepted answers");
  if (response.size() != question.accepted_answers.front().size())
    throw std::domain_error("response length " + std::to_string(response.size()) +
                            " does not match answer length");
  for (const auto& a : question.accepted_answers)
    if (std::equal(a.begin(), a.end(), response.begin())) return 1;
  return 0;
}

double RolloutGroup::reward_sum() const {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

bool RolloutGroup::all_incorrect() const {
  return std::all_of(rewards.begin(), rewards.end(), [](double r) { return r == 0.0; });
}

bool RolloutGroup::all_correct() const {
  return std::all_of(rewards.begin(), rewards.end(), [](double r) { return r == 1.0; });
}

RolloutGroup rollout(const PolicyTable& policy, const SyntheticQuestion& question,
                     int budget, double tau, Rng& rng) {
  if (budget < 1) throw std::domain_error("rollout budget must be >= 1");
  if (!(tau > 0.0)) throw std::domain_error("temperature must be positive");
  const std::size_t L = policy.length();
  const std::size_t V = policy.vocab();
  if (question.base_logits.size() != L * V)
    throw std::domain_error("question does not match the policy shape");

  std::vector<std::vector<double>> probs(L, std::vector<double>(V));
  std::vector<double> entropy(L);
  for (std::size_t pos = 0; pos < L; ++pos) {
    policy_distribution(policy, question.context, question.base_logits, pos, tau,
                        probs[pos]);
    entropy[pos] = entropy_of(probs[pos]);
  }

  RolloutGroup g;
  g.question_id = question.id;
  g.temperature = tau;
  for (int i = 0; i < budget; ++i) {
    std::vector<int> response(L);
    std::vector<double> logprob(L);
    for (std::size_t pos = 0; pos < L; ++pos) {
      const std::size_t tok = sample_index(probs[pos], rng);
      response[pos] = static_cast<int>(tok);
      logprob[pos] = std::log(probs[pos][tok]);
    }
    g.rewards.push_back(static_cast<double>(rule_reward(response, question)));
    g.responses.push_back(std::move(response));
    g.logprobs.push_back(std::move(logprob));
    g.entropies.push_back(entropy);
  }
  return g;
}

std::vector<SyntheticQuestion> assess_and_balance(
    std::vector<SyntheticQuestion> bank, const PolicyTable& probe_policy,
    std::size_t samples_per_question, std::size_t easy_cap, Rng& rng) {
  if (samples_per_question < 1)
    throw std::domain_error("samples_per_question must be >= 1");
  std::vector<std::size_t> easy;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const RolloutGroup probe =
        rollout(probe_policy, bank[i], static_cast<int>(samples_per_question), 1.0, rng);
    if (probe.all_correct()) easy.push_back(i);
  }
  if (easy.size() <= easy_cap) return bank;

  for (std::size_t i = 0; i + 1 < easy.size(); ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(uniform01(rng) *
                                     static_cast<double>(easy.size() - i));
    std::swap(easy[i], easy[j]);
  }
  std::vector<bool> drop(bank.size(), false);
  for (std::size_t i = easy_cap; i < easy.size(); ++i) drop[easy[i]] = true;
  std::vector<SyntheticQuestion> kept;
  kept.reserve(bank.size() - (easy.size() - easy_cap));
  for (std::size_t i = 0; i < bank.size(); ++i)
    if (!drop[i]) kept.push_back(std::move(bank[i]));
  return kept;
}

void export_bank(std::span<const SyntheticQuestion> bank, std::ostream& out) {
  for (const auto& q : bank) {
    nlohmann::ordered_json j;
    j["id"] = q.id;
    j["context"] = q.context;
    j["difficulty"] = q.latent_difficulty;
    j["init_gap"] = q.init_gap;
    j["accepted"] = q.accepted_answers;
    j["base_logits"] = q.base_logits;
    out << j.dump() << '\n';
  }
}

std::vector<SyntheticQuestion> import_bank(std::istream& in) {
  std::vector<SyntheticQuestion> bank;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SyntheticQuestion q;
      q.id = j.at("id").get<std::int64_t>();
      q.context = j.at("context").get<std::size_t>();
      q.latent_difficulty = j.at("difficulty").get<double>();
      q.init_gap = j.at("init_gap").get<double>();
      q.accepted_answers = j.at("accepted").get<std::vector<std::vector<int>>>();
      q.base_logits = j.at("base_logits").get<std::vector<double>>();
      if (q.accepted_answers.empty())
        throw std::runtime_error("no accepted answers");
      bank.push_back(std::move(q));
    } catch (const std::exception& e) {
      throw std::runtime_error("bank line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return bank;
}

}  // namespace tgrpo
