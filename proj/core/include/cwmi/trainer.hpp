#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cwmi/cpm.hpp"
#include "cwmi/scenario.hpp"

namespace cwmi {

/// Per-step record. Losses are measured on the batch before the update is
/// applied; l_pred and l_causal are always reported, host-computed when the
/// ablation mode never builds that branch in the graph.
struct StepLog {
  long step = 0;
  double lr = 0.0;
  double l_pred = 0.0;
  double l_causal = 0.0;
  double l_total = 0.0;
  double wall_ms = 0.0;
};

/// Pooled encoder rows and targets for one dataset split, pair-aligned:
/// row i of every member belongs to pair i.
struct EncodedSplit {
  Tensor h_f;        // (N, d_llm)
  Tensor h_cf;       // (N, d_llm)
  Tensor target_f;   // (N, kStateDim)
  Tensor target_cf;  // (N, kStateDim)
  long count() const { return h_f.rank() == 2 ? h_f.dim(0) : 0; }
};

/// Runs every scene of the split through the frozen encoder once. The rows
/// never change during training, so callers cache and share them.
EncodedSplit encode_split(const SceneEncoder& enc, const std::vector<ScenarioPair>& pairs);

struct TrainResult {
  std::vector<StepLog> logs;
  long steps_run = 0;
  double wall_seconds = 0.0;
  std::string checkpoint_path;
};

/// Optimizes the trainable parameters of `model` on cached rows. Writes
/// train_log.csv and model.ckpt under cfg.out_dir. If the batch loss goes
/// non-finite the last finite parameters are saved to model.diverged.ckpt
/// and TrainingDivergedError is thrown.
TrainResult train_model(const RunConfig& cfg, WorldModel& model, const EncodedSplit& train_rows,
                        const std::function<void(const StepLog&)>& on_step = nullptr);

void write_train_log_csv(const std::string& path, const std::vector<StepLog>& logs);

}  // namespace cwmi
