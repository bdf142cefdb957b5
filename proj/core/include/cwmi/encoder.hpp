#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "cwmi/blocks.hpp"
#include "cwmi/config.hpp"
#include "cwmi/physics.hpp"

namespace cwmi {

inline constexpr int kQuantBins = 32;

struct QuantRange {
  double lo;
  double hi;
};

/// Fixed quantization range for a named scene field (mass, radius, mu, e,
/// x, y, vx, vy, angle, length, foot). Bin words are derived from these.
QuantRange quant_range(const std::string& field);

/// Half-open binning: lo maps to bin 0, values at or past hi clamp to the
/// last bin.
int quant_bin(double v, const QuantRange& r);

std::string bin_word(const std::string& field, int bin);

/// Closed vocabulary built in a fixed order; word ids are stable across
/// processes. Id 0 is the pad token.
class Vocabulary {
 public:
  static Vocabulary build(int capacity);
  int id(const std::string& word) const;
  const std::string& word(int id) const;
  int size() const { return static_cast<int>(words_.size()); }
  static constexpr int pad_id() { return 0; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// Deterministic textual rendering of a scene: template word, environment
/// fields, then per-object property words, every number quantized to a bin
/// word. Equal scenes render to equal strings.
std::string render_scene_text(const Scene& scene);

/// Tensor specs of the frozen encoder (embedding table + transformer
/// blocks), names prefixed "enc.".
std::vector<TensorSpec> encoder_tensor_specs(const EncoderConfig& cfg);

/// Freshly drawn frozen encoder weights for cfg.init_seed. Bin-word
/// embedding rows get ordinal geometry (per-field base + ramp direction
/// plus jitter) so numerically adjacent bins embed near each other, the way
/// a pretrained backbone lays out numerals; other rows stay i.i.d. normal.
ParameterSet init_encoder_params(const EncoderConfig& cfg);

/// Frozen random-weight text encoder. Weights are generated once from
/// cfg.init_seed and never updated; the downstream model sees scenes only
/// through the pooled hidden state h (last non-pad position, final layer).
class SceneEncoder {
 public:
  explicit SceneEncoder(const EncoderConfig& cfg);
  SceneEncoder(const EncoderConfig& cfg, ParameterSet params);

  const EncoderConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  const ParameterSet& params() const { return params_; }

  std::vector<int> tokenize(const std::string& text) const;

  /// Pooled hidden states for a batch of scenes, one row per scene, in
  /// order. Deterministic for a given scene list.
  Tensor encode_scenes(const std::vector<Scene>& scenes) const;
  Tensor encode_token_rows(const std::vector<std::vector<int>>& rows) const;

  /// Appends the whole encoder to an existing graph (for end-to-end
  /// differentiation checks). Returns the pooled (n, d_llm) node. The
  /// embedding gather happens host-side; the embedded input, mask and
  /// pooling selector become frozen leaves of `g`.
  int append_to_graph(Graph& g, const std::vector<std::vector<int>>& rows) const;

 private:
  EncoderConfig cfg_;
  Vocabulary vocab_;
  ParameterSet params_;
};

}  // namespace cwmi
