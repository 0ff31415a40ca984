#pragma once

#include <stdexcept>

namespace tgrpo {

// Domain violations use std::domain_error and out-of-range results use
// std::range_error; the types below cover the remaining failure classes.

/// An operation was called in the wrong lifecycle state.
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// A configuration violates its invariants; raised before any work starts.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A root-finding bracket does not straddle the target.
struct BracketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input for which the requested quantity has no solution (e.g. constant entropy).
struct DegenerateInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tgrpo
