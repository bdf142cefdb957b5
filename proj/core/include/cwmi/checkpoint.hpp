#pragma once

#include <string>
#include <vector>

#include "cwmi/config.hpp"
#include "cwmi/params.hpp"

namespace cwmi {

inline constexpr int kCheckpointVersion = 1;

/// Binary layout: 8-byte magic, u32 format version, u64 manifest length,
/// JSON manifest (config echo + tensor directory + payload hash), then all
/// tensor data as little-endian doubles in directory order.
void save_checkpoint(const std::string& path, const RunConfig& cfg, const ParameterSet& ps);

struct Checkpoint {
  RunConfig config;
  ParameterSet params;
};

/// Loads and verifies a checkpoint. Failure modes are distinct:
/// CheckpointVersionError (bad magic or version), CheckpointTruncatedError
/// (file shorter than the manifest promises), CheckpointHashError (payload
/// contents disagree with the stored hash).
Checkpoint load_checkpoint(const std::string& path);

/// Verifies that a parameter set matches the given specs exactly (names,
/// order, shapes, trainability). Throws CheckpointShapeError naming the
/// first offending tensor.
void check_params_match(const ParameterSet& ps, const std::vector<TensorSpec>& specs);

}  // namespace cwmi
