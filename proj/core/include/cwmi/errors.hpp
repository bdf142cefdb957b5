#pragma once

#include <stdexcept>
#include <string>

namespace cwmi {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite value appeared during simulation. Carries the step index.
struct SimulationDivergedError : Error {
  long step_index;
  explicit SimulationDivergedError(long step, const std::string& what_part)
      : Error("simulation diverged at step " + std::to_string(step) + ": " + what_part),
        step_index(step) {}
};

/// Requested closed-form outcome outside the analytic regime.
struct UnsupportedRegimeError : Error {
  using Error::Error;
};

/// More objects than the fixed slot capacity.
struct CapacityError : Error {
  using Error::Error;
};

/// Scene or dataset generation could not satisfy validity constraints.
struct GenerationError : Error {
  using Error::Error;
};

/// A record contradicts the scene it claims to describe.
struct ConsistencyError : Error {
  using Error::Error;
};

/// Tensor shape mismatch in the compute graph. Names the offending node.
struct DimensionError : Error {
  using Error::Error;
};

/// An API precondition was violated (non-scalar loss, bad epsilon, length mismatch).
struct ContractError : Error {
  using Error::Error;
};

/// Non-finite value produced by a model component.
struct NumericError : Error {
  using Error::Error;
};

/// Training aborted on non-finite loss or gradients. Carries the step.
struct TrainingDivergedError : Error {
  long step;
  explicit TrainingDivergedError(long s, const std::string& what_part)
      : Error("training diverged at step " + std::to_string(s) + ": " + what_part), step(s) {}
};

/// Token or word outside the closed vocabulary.
struct VocabularyError : Error {
  using Error::Error;
};

/// Evaluation input does not cover complete factual/counterfactual pairs.
struct CoverageError : Error {
  using Error::Error;
};

/// File could not be read or written. Message carries the path.
struct IoError : Error {
  using Error::Error;
};

/// Invalid or contradictory configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Checkpoint loading failures are distinct types so callers can tell
// an unreadable file from a stale one from a corrupted one.
struct CheckpointVersionError : Error {
  using Error::Error;
};
struct CheckpointHashError : Error {
  using Error::Error;
};
struct CheckpointTruncatedError : Error {
  using Error::Error;
};
struct CheckpointShapeError : Error {
  using Error::Error;
};

}  // namespace cwmi
