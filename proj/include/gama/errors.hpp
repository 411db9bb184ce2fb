#pragma once

#include <stdexcept>

namespace gama {

/// Bad arguments, shape mismatches, out-of-range labels.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed input files or non-finite data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Ill-posed geometric queries (too few neighbors, rank-deficient
/// neighborhoods).
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values produced during numeric evaluation.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unparseable or inconsistent experiment configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training diverged; the caller retains the last finite state.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gama
