#pragma once

// Random instances shared by the unit and acceptance suites.

#include <algorithm>
#include <bit>
#include <cmath>
#include <span>
#include <vector>

#include "tgrpo/grpo_core.hpp"
#include "tgrpo/rng.hpp"

namespace tgrpo::testing {

inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1));
}

struct Instance {
  PolicyTable table;
  std::vector<std::vector<double>> bases;
  std::vector<GroupExperience> groups;
  ObjectiveConfig config;
};

// A random batch whose stored old log-probabilities put every importance
// ratio at least 1e-4 away from the clip edges.
inline Instance random_instance(Rng& rng, bool entropy_term) {
  Instance in;
  const auto slots = static_cast<std::size_t>(uniform_int(rng, 1, 2));
  const auto length = static_cast<std::size_t>(uniform_int(rng, 1, 3));
  const auto vocab = static_cast<std::size_t>(uniform_int(rng, 2, 16));
  in.table = PolicyTable(slots, length, vocab);
  for (double& v : in.table.data()) v = standard_normal(rng);
  in.config.epsilon = 0.2;
  in.config.entropy_coef = entropy_term ? 0.5 : 0.0;

  const int n_groups = uniform_int(rng, 1, 3);
  in.bases.resize(static_cast<std::size_t>(n_groups));
  for (int gi = 0; gi < n_groups; ++gi) {
    auto& base = in.bases[gi];
    base.resize(length * vocab);
    for (double& v : base) v = standard_normal(rng);
    GroupExperience g;
    g.slot = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(slots) - 1));
    g.temperature = 0.5 + 1.5 * uniform01(rng);
    const int size = uniform_int(rng, 2, 8);
    for (int i = 0; i < size; ++i) {
      TokenTrajectory tr;
      const auto len = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<int>(length)));
      for (std::size_t t = 0; t < len; ++t)
        tr.tokens.push_back(uniform_int(rng, 0, static_cast<int>(vocab) - 1));
      g.trajectories.push_back(tr);
      g.advantages.push_back(standard_normal(rng));
    }
    in.groups.push_back(std::move(g));
  }
  for (std::size_t gi = 0; gi < in.groups.size(); ++gi) {
    auto& g = in.groups[gi];
    g.base_logits = in.bases[gi];
    score_trajectories(in.table, g);
    for (auto& tr : g.trajectories) {
      tr.logprob_old = tr.logprob_new;
      for (double& lp : tr.logprob_old) {
        double shift;
        do {
          shift = 0.6 * (uniform01(rng) - 0.5);
        } while (std::abs(std::exp(-shift) - 0.8) < 1e-4 ||
                 std::abs(std::exp(-shift) - 1.2) < 1e-4);
        lp += shift;
      }
    }
  }
  return in;
}

inline double max_abs(std::span<const double> v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Largest |analytic - central difference| over the table, relative to the
/// largest numeric component.
inline double gradient_error(Instance& in, double h = 1e-5) {
  const PolicyTable analytic = batch_gradient(in.table, in.groups, in.config);
  std::vector<double> numeric(in.table.data().size());
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double keep = in.table.data()[i];
    in.table.data()[i] = keep + h;
    const double up = batch_objective(in.table, in.groups, in.config);
    in.table.data()[i] = keep - h;
    const double down = batch_objective(in.table, in.groups, in.config);
    in.table.data()[i] = keep;
    numeric[i] = (up - down) / (2 * h);
  }
  const double scale = std::max(max_abs(numeric), 1e-12);
  double worst = 0;
  for (std::size_t i = 0; i < numeric.size(); ++i)
    worst = std::max(worst, std::abs(analytic.data()[i] - numeric[i]) / scale);
  return worst;
}

// Fraction of k-subsets of n samples (c of them correct) that hit a correct one.
inline double pass_by_enumeration(int n, int c, int k) {
  int total = 0, hit = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != k) continue;
    ++total;
    if ((mask & ((1u << c) - 1)) != 0) ++hit;
  }
  return static_cast<double>(hit) / total;
}

}  // namespace tgrpo::testing
