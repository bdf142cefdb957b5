#pragma once

#include <functional>
#include <string>

#include "cwmi/evaluator.hpp"

namespace cwmi {

/// Generates the scenario dataset described by cfg.gen into cfg.data_dir.
DatasetManifest run_gen_data(const RunConfig& cfg);

struct TrainArtifacts {
  WorldModel model;
  TrainResult result;
};

/// Builds a fresh model (trainable stack seeded by cfg.train.seed, encoder
/// by cfg.encoder.init_seed) and optimizes it on the train split. Pass
/// cached rows to skip re-encoding; they must match ds.train.
TrainArtifacts run_train(const RunConfig& cfg, const Dataset& ds,
                         const EncodedSplit* cached_train = nullptr,
                         const std::function<void(const StepLog&)>& on_step = nullptr);

struct EvalArtifacts {
  RunConfig config;  // echoed from the checkpoint
  EvalOutput out;
};

/// Restores a checkpoint, verifies its parameters against its own declared
/// architecture, scores one dataset split and writes a report.
EvalArtifacts run_eval(const std::string& checkpoint_path, const std::string& data_dir,
                       const std::string& split, const std::string& report_dir,
                       const EncodedSplit* cached_rows = nullptr);

}  // namespace cwmi
