#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace tgrpo {

using Rng = std::mt19937_64;

/// Tags separating the independent random streams of a run.
enum class Stream : std::uint64_t {
  family = 1,
  train_bank,
  eval_bank,
  balance,
  shuffle,
  rollout,
  dapo,
  eval,
  outlier,
  test,
};

/// Derives an engine from (seed, tag, a, b, c) by splitmix64 chaining, so that
/// e.g. the rollouts of question q at step t never depend on execution order.
Rng make_stream(std::uint64_t seed, Stream tag, std::uint64_t a = 0,
                std::uint64_t b = 0, std::uint64_t c = 0);

/// Uniform on [0, 1) with 53 random bits.
double uniform01(Rng& rng);

/// Standard normal via Box-Muller; consumes exactly two engine outputs.
double standard_normal(Rng& rng);

/// Draws an index with probability proportional to probs[i] (inverse CDF).
std::size_t sample_index(std::span<const double> probs, Rng& rng);

}  // namespace tgrpo
