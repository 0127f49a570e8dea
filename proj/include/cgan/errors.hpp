#pragma once

#include <stdexcept>
#include <string>

namespace cgan {

/// Tensor/layer dimension mismatch.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value (dropout rate >= 1, negative k3, bad config file, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input data (CSV parse failures carry the line number in the message).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Structurally valid data that violates a contract (non-uniform spacing, duplicate
/// timestamps, inconsistent window sizes, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Constraint set has no feasible point.
struct EmptyPolytopeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Degenerate input distribution (e.g. all-zero load series).
struct DegenerateDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A filter selected no samples; training must not silently proceed.
struct EmptyDatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training aborted (NaN loss, repeated solver failures).
struct TrainingAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cgan
