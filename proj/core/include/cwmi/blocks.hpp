#pragma once

#include <string>
#include <vector>

#include "cwmi/params.hpp"

namespace cwmi {

/// Appends the tensor specs of one post-norm transformer block under
/// `prefix`: self-attention projections (with biases), two layer norms, and
/// a GELU feed-forward expanding to d_ff.
void append_block_specs(std::vector<TensorSpec>& out, const std::string& prefix, int d_model,
                        int d_ff, bool trainable);

/// Builds y = LayerNorm(x + MHSA(x)); out = LayerNorm(y + FFN(y)).
///
/// `x` is rank-2 (groups*seq, d_model): `groups` independent sequences of
/// length `seq` stacked row-wise. Attention never crosses group boundaries.
/// `mask` is -1 for none, or an additive (groups, 1, seq) tensor applied to
/// every query's score row (large negative entries silence positions).
/// Returns the output node id.
int transformer_block(Graph& g, int x, const LeafBank& leaves, const std::string& prefix,
                      int groups, int seq, int heads, int mask = -1);

}  // namespace cwmi
