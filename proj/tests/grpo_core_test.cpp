#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tgrpo/grpo_core.hpp"
#include "tgrpo/rng.hpp"
#include "tgrpo/softmax_entropy.hpp"
#include "instances.hpp"

using namespace tgrpo;
using namespace tgrpo::testing;

namespace {

TokenTrajectory one_token(double ratio) {
  TokenTrajectory t;
  t.tokens = {0};
  t.logprob_old = {std::log(0.5)};
  t.logprob_new = {std::log(0.5 * ratio)};
  return t;
}

void check_gradient(Instance& in) { CHECK(gradient_error(in) <= 1e-5); }

}  // namespace

TEST_CASE("advantage examples") {
  CHECK(group_advantages(std::vector<double>{1, 1, 1, 1}) == std::vector<double>(4, 0.0));
  const auto two = group_advantages(std::vector<double>{1, 0});
  CHECK(two[0] == doctest::Approx(1.0));
  CHECK(two[1] == doctest::Approx(-1.0));
  const auto four = group_advantages(std::vector<double>{1, 0, 0, 0});
  const double sd = std::sqrt(0.1875);
  CHECK(four[0] == doctest::Approx(0.75 / sd).epsilon(1e-15));
  CHECK(std::abs(four[0] - 1.732051) < 1e-6);
  for (int i = 1; i < 4; ++i) CHECK(std::abs(four[i] + 0.577350) < 1e-6);
  CHECK_THROWS_AS(group_advantages(std::vector<double>{1}), std::domain_error);
}

TEST_CASE("advantages are standardized") {
  Rng rng = make_stream(41, Stream::test);
  for (int trial = 0; trial < 10000; ++trial) {
    const int g = uniform_int(rng, 2, 32);
    std::vector<double> r(static_cast<std::size_t>(g));
    for (auto& v : r) v = uniform01(rng) < 0.5 ? 1.0 : 0.0;
    if (std::all_of(r.begin(), r.end(), [&](double v) { return v == r[0]; })) r[0] = 1 - r[0];
    const auto a = group_advantages(r);
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / g;
    double ss = 0;
    for (double v : a) ss += (v - mean) * (v - mean);
    CHECK(std::abs(mean) <= 1e-9);
    CHECK(std::abs(std::sqrt(ss / g) - 1.0) <= 1e-9);
  }
}

TEST_CASE("sample estimator uses Bessel's correction") {
  const auto a = group_advantages(std::vector<double>{1, 0}, StdEstimator::sample);
  CHECK(a[0] == doctest::Approx(0.5 / std::sqrt(0.5)));
}

TEST_CASE("clipped surrogate examples") {
  std::vector<TokenTrajectory> one = {one_token(1.5)};
  CHECK(clipped_surrogate(one, std::vector<double>{1.0}, 0.2) == doctest::Approx(1.2));
  CHECK(clipped_surrogate(one, std::vector<double>{0.0}, 0.2) == 0.0);

  std::vector<TokenTrajectory> unit = {one_token(1.0), one_token(1.0), one_token(1.0)};
  unit[1].tokens = {0, 1};
  unit[1].logprob_old = {-1.0, -2.0};
  unit[1].logprob_new = {-1.0, -2.0};
  const std::vector<double> adv = {0.5, -1.5, 2.5};
  CHECK(clipped_surrogate(unit, adv, 0.2) == doctest::Approx((0.5 - 1.5 + 2.5) / 3));

  CHECK_THROWS_AS(clipped_surrogate(unit, std::vector<double>{1.0}, 0.2), std::domain_error);
  unit[0].logprob_new.clear();
  CHECK_THROWS_AS(clipped_surrogate(unit, adv, 0.2), std::domain_error);
}

TEST_CASE("token contributions respect the clip bound, order does not matter") {
  Rng rng = make_stream(42, Stream::test);
  for (int trial = 0; trial < 2000; ++trial) {
    const double ratio = std::exp(2 * standard_normal(rng));
    const double a = standard_normal(rng);
    std::vector<TokenTrajectory> t = {one_token(ratio)};
    const double v = clipped_surrogate(t, std::vector<double>{a}, 0.2);
    // The pessimistic min is capped above everywhere; below only where the clip can bind.
    CHECK(v <= std::max(a * 0.8, a * 1.2) + 1e-12);
    if ((a > 0 && ratio >= 0.8) || (a < 0 && ratio <= 1.2))
      CHECK(v >= std::min(a * 0.8, a * 1.2) - 1e-12);
    else
      CHECK(v == doctest::Approx(ratio * a));
  }
  std::vector<TokenTrajectory> g = {one_token(0.7), one_token(1.1), one_token(1.6)};
  std::vector<double> adv = {1.0, -0.3, 0.4};
  const double before = clipped_surrogate(g, adv, 0.2);
  std::reverse(g.begin(), g.end());
  std::reverse(adv.begin(), adv.end());
  CHECK(clipped_surrogate(g, adv, 0.2) == doctest::Approx(before).epsilon(1e-15));
}

TEST_CASE("entropy bonus") {
  PolicyTable table(1, 1, 16);
  GroupExperience g;
  g.trajectories.push_back(one_token(1.0));
  g.advantages = {0.0};
  std::vector<GroupExperience> groups = {g};
  CHECK(entropy_bonus(table, groups, 0.0) == 0.0);
  CHECK(entropy_bonus(table, groups, 1.0) == doctest::Approx(std::log(16.0)));
  CHECK_THROWS_AS(entropy_bonus(table, groups, -1.0), std::domain_error);
}

TEST_CASE("zero advantages: plain step is a no-op, the entropy term spreads the policy") {
  Rng rng = make_stream(43, Stream::test);
  Instance in = random_instance(rng, false);
  for (auto& g : in.groups) std::fill(g.advantages.begin(), g.advantages.end(), 0.0);
  const PolicyTable before = in.table;
  policy_step(in.table, in.groups, 1.0, in.config);
  CHECK(in.table == before);

  in.config.entropy_coef = 1e-1;
  auto mean_entropy = [&](const PolicyTable& t) {
    return entropy_bonus(t, in.groups, 1.0);
  };
  const double h0 = mean_entropy(in.table);
  policy_step(in.table, in.groups, 1.0, in.config);
  CHECK(mean_entropy(in.table) > h0);
}

TEST_CASE("groups with identical rewards contribute no gradient") {
  Rng rng = make_stream(44, Stream::test);
  Instance in = random_instance(rng, false);
  for (auto& g : in.groups) {
    std::vector<double> same(g.trajectories.size(), 1.0);
    g.advantages = group_advantages(same);
  }
  const PolicyTable grad = batch_gradient(in.table, in.groups, in.config);
  CHECK(max_abs(grad.data()) == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng = make_stream(45, Stream::test);
  for (int trial = 0; trial < 100; ++trial) {
    CAPTURE(trial);
    Instance in = random_instance(rng, trial % 2 == 1);
    check_gradient(in);
  }
}

TEST_CASE("gradient at ratio one is the policy gradient") {
  Rng rng = make_stream(46, Stream::test);
  for (int trial = 0; trial < 20; ++trial) {
    Instance in = random_instance(rng, false);
    for (auto& g : in.groups) {
      score_trajectories(in.table, g);
      for (auto& tr : g.trajectories) tr.logprob_old = tr.logprob_new;
    }
    check_gradient(in);
  }
}
