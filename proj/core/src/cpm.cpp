#include "cwmi/cpm.hpp"

#include <algorithm>
#include <cmath>

namespace cwmi {

namespace {
constexpr int kPredictChunk = 128;
}

std::vector<TensorSpec> projection_tensor_specs(int d_llm) {
  return {
      {"proj.weight", {d_llm, kStateDim}, true, Init::Normal,
       1.0 / std::sqrt(static_cast<double>(d_llm))},
      {"proj.bias", {kStateDim}, true, Init::Zero, 0.0},
  };
}

std::vector<TensorSpec> cpm_tensor_specs(const CpmConfig& cfg) {
  std::vector<TensorSpec> specs;
  specs.push_back({"cpm.lift", {kSlotProps, cfg.d_model}, true, Init::Normal,
                   1.0 / std::sqrt(static_cast<double>(kSlotProps))});
  specs.push_back({"cpm.slot_pos", {kNumSlots, cfg.d_model}, true, Init::Normal, 0.5});
  for (int l = 0; l < cfg.layers; ++l) {
    append_block_specs(specs, "cpm." + std::to_string(l), cfg.d_model, 4 * cfg.d_model,
                       /*trainable=*/true);
  }
  specs.push_back({"cpm.head", {cfg.d_model, kSlotProps}, true, Init::Normal,
                   1.0 / std::sqrt(static_cast<double>(cfg.d_model))});
  return specs;
}

std::vector<TensorSpec> affine_head_tensor_specs() {
  return {
      {"head.weight", {kStateDim, kStateDim}, true, Init::Normal,
       1.0 / std::sqrt(static_cast<double>(kStateDim))},
      {"head.bias", {kStateDim}, true, Init::Zero, 0.0},
  };
}

std::vector<TensorSpec> model_tensor_specs(const ModelArch& arch) {
  std::vector<TensorSpec> specs = projection_tensor_specs(arch.encoder.d_llm);
  const std::vector<TensorSpec> core =
      arch.mode == TrainMode::NoCpm ? affine_head_tensor_specs() : cpm_tensor_specs(arch.cpm);
  specs.insert(specs.end(), core.begin(), core.end());
  const std::vector<TensorSpec> enc = encoder_tensor_specs(arch.encoder);
  specs.insert(specs.end(), enc.begin(), enc.end());
  return specs;
}

std::int64_t cpm_param_count(const CpmConfig& cfg) {
  std::int64_t n = 0;
  for (const TensorSpec& s : cpm_tensor_specs(cfg)) n += shape_numel(s.shape);
  return n;
}

StatePredictorOut build_state_predictor(Graph& g, const LeafBank& leaves, int h_node,
                                        const CpmConfig& cpm, TrainMode mode) {
  const int n = g.value(h_node).dim(0);
  StatePredictorOut out;
  out.s0 = g.add(g.matmul(h_node, leaves.id("proj.weight")), leaves.id("proj.bias"));

  if (mode == TrainMode::NoCpm) {
    out.s_hat = g.add(g.matmul(out.s0, leaves.id("head.weight")), leaves.id("head.bias"));
    return out;
  }

  const int d = cpm.d_model;
  const int tokens = g.matmul(g.reshape(out.s0, {n * kNumSlots, kSlotProps}),
                              leaves.id("cpm.lift"));
  const int placed = g.reshape(
      g.add(g.reshape(tokens, {n, kNumSlots, d}), leaves.id("cpm.slot_pos")),
      {n * kNumSlots, d});

  int x = placed;
  for (int l = 0; l < cpm.layers; ++l) {
    x = transformer_block(g, x, leaves, "cpm." + std::to_string(l), n, kNumSlots, cpm.heads);
    out.layer_outputs.push_back(x);
  }
  out.s_hat = g.reshape(g.matmul(x, leaves.id("cpm.head")), {n, kStateDim});
  return out;
}

WorldModel::WorldModel(const ModelArch& arch, std::uint64_t init_seed)
    : WorldModel(arch, [&] {
        // The frozen encoder always draws from its own init_seed so pooled
        // rows are identical across training seeds; init_seed only shapes
        // the trainable stack.
        std::vector<TensorSpec> trainable;
        for (const TensorSpec& s : model_tensor_specs(arch)) {
          if (s.trainable) trainable.push_back(s);
        }
        ParameterSet ps = init_params(trainable, init_seed);
        ParameterSet enc = init_encoder_params(arch.encoder);
        for (NamedTensor& nt : enc.items()) ps.add(nt.name, std::move(nt.tensor), false);
        return ps;
      }()) {}

WorldModel::WorldModel(const ModelArch& arch, ParameterSet params)
    : arch_(arch), params_(std::move(params)), encoder_(arch.encoder, [&] {
        // Split the encoder tensors out of the combined set so the encoder
        // owns its weights; trainable tensors stay here.
        ParameterSet enc;
        for (const TensorSpec& spec : encoder_tensor_specs(arch.encoder)) {
          enc.add(spec.name, params_.get(spec.name), false);
        }
        return enc;
      }()) {
  if (arch_.cpm.d_model % arch_.cpm.heads != 0) {
    throw ConfigError("cpm d_model must be divisible by heads");
  }
}

Tensor WorldModel::pool_scenes(const std::vector<Scene>& scenes) const {
  return encoder_.encode_scenes(scenes);
}

Tensor WorldModel::predict(const Tensor& h_rows) const {
  if (h_rows.rank() != 2 || h_rows.dim(1) != arch_.encoder.d_llm) {
    throw DimensionError("predict expects (n, d_llm) pooled rows");
  }
  const int n = h_rows.dim(0);
  Tensor out({n, kStateDim});
  for (int start = 0; start < n; start += kPredictChunk) {
    const int b = std::min(kPredictChunk, n - start);
    Graph g;
    LeafBank leaves(g, model_tensor_specs(arch_));
    const int h_leaf = g.leaf({b, arch_.encoder.d_llm}, false, "h_pool");
    Tensor h_chunk({b, arch_.encoder.d_llm});
    std::copy(h_rows.data() + static_cast<std::size_t>(start) * arch_.encoder.d_llm,
              h_rows.data() + static_cast<std::size_t>(start + b) * arch_.encoder.d_llm,
              h_chunk.data());
    g.set_leaf(h_leaf, h_chunk);
    leaves.bind(g, params_);
    const StatePredictorOut pred = build_state_predictor(g, leaves, h_leaf, arch_.cpm,
                                                         arch_.mode);
    g.forward();
    for (std::size_t l = 0; l < pred.layer_outputs.size(); ++l) {
      if (!g.value(pred.layer_outputs[l]).all_finite()) {
        throw NumericError("cpm layer " + std::to_string(l) + " produced non-finite output");
      }
    }
    if (!g.value(pred.s_hat).all_finite()) {
      throw NumericError("state head produced non-finite output");
    }
    std::copy(g.value(pred.s_hat).data(),
              g.value(pred.s_hat).data() + static_cast<std::size_t>(b) * kStateDim,
              out.data() + static_cast<std::size_t>(start) * kStateDim);
  }
  return out;
}

}  // namespace cwmi
