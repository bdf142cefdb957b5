#pragma once

#include <cstdint>
#include <vector>

#include "cwmi/blocks.hpp"
#include "cwmi/config.hpp"
#include "cwmi/encoder.hpp"

namespace cwmi {

/// Architecture of the trainable stack plus its frozen text encoder.
struct ModelArch {
  EncoderConfig encoder;
  CpmConfig cpm;
  TrainMode mode = TrainMode::Full;
};

/// Linear read-in from the pooled encoder state to the flat state vector.
std::vector<TensorSpec> projection_tensor_specs(int d_llm);

/// Slot-factored transformer core: per-slot lift to d_model, slot position
/// embeddings, post-norm blocks, linear head back to slot properties.
std::vector<TensorSpec> cpm_tensor_specs(const CpmConfig& cfg);

/// Plain affine 40 -> 40 head used by the NO_CPM ablation.
std::vector<TensorSpec> affine_head_tensor_specs();

/// Trainable specs for `mode` followed by the frozen encoder specs; this is
/// the canonical parameter order for graphs, optimizers and checkpoints.
std::vector<TensorSpec> model_tensor_specs(const ModelArch& arch);

/// Element count of the trainable CPM core (excludes the projection).
std::int64_t cpm_param_count(const CpmConfig& cfg);

struct StatePredictorOut {
  int s0 = -1;     // projected state read off h, (n, kStateDim)
  int s_hat = -1;  // predicted final state, (n, kStateDim)
  std::vector<int> layer_outputs;
};

/// Appends projection + (CPM | affine head) to a graph. `h_node` must be a
/// rank-2 (n, d_llm) node. The projection output is the single entry point
/// of the trainable stack.
StatePredictorOut build_state_predictor(Graph& g, const LeafBank& leaves, int h_node,
                                        const CpmConfig& cpm, TrainMode mode);

/// Frozen encoder + trainable state predictor with storage. Handles
/// batched inference; training uses the graphs directly.
class WorldModel {
 public:
  WorldModel(const ModelArch& arch, std::uint64_t init_seed);
  WorldModel(const ModelArch& arch, ParameterSet params);

  const ModelArch& arch() const { return arch_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const SceneEncoder& encoder() const { return encoder_; }

  /// Pooled encoder states, one row per scene.
  Tensor pool_scenes(const std::vector<Scene>& scenes) const;

  /// Predicted final states from pooled rows; checks every CPM layer output
  /// and throws NumericError naming the first non-finite layer.
  Tensor predict(const Tensor& h_rows) const;

 private:
  ModelArch arch_;
  ParameterSet params_;
  SceneEncoder encoder_;
};

}  // namespace cwmi
