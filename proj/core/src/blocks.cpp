#include "cwmi/blocks.hpp"

#include <cmath>

namespace cwmi {

void append_block_specs(std::vector<TensorSpec>& out, const std::string& prefix, int d_model,
                        int d_ff, bool trainable) {
  const double w_sigma = 1.0 / std::sqrt(static_cast<double>(d_model));
  const double ff_sigma = 1.0 / std::sqrt(static_cast<double>(d_ff));
  auto weight = [&](const std::string& name, std::vector<int> shape, double sigma) {
    out.push_back({prefix + name, std::move(shape), trainable, Init::Normal, sigma});
  };
  auto zero = [&](const std::string& name, std::vector<int> shape) {
    out.push_back({prefix + name, std::move(shape), trainable, Init::Zero, 0.0});
  };
  auto one = [&](const std::string& name, std::vector<int> shape) {
    out.push_back({prefix + name, std::move(shape), trainable, Init::One, 0.0});
  };
  weight(".attn.wq", {d_model, d_model}, w_sigma);
  zero(".attn.bq", {d_model});
  // no key bias: softmax is invariant to a shared shift of a row's logits,
  // so a key bias never receives gradient and would only pad the count
  weight(".attn.wk", {d_model, d_model}, w_sigma);
  weight(".attn.wv", {d_model, d_model}, w_sigma);
  zero(".attn.bv", {d_model});
  weight(".attn.wo", {d_model, d_model}, w_sigma);
  zero(".attn.bo", {d_model});
  one(".ln1.g", {d_model});
  zero(".ln1.b", {d_model});
  weight(".ffn.w1", {d_model, d_ff}, w_sigma);
  zero(".ffn.b1", {d_ff});
  weight(".ffn.w2", {d_ff, d_model}, ff_sigma);
  zero(".ffn.b2", {d_model});
  one(".ln2.g", {d_model});
  zero(".ln2.b", {d_model});
}

int transformer_block(Graph& g, int x, const LeafBank& leaves, const std::string& prefix,
                      int groups, int seq, int heads, int mask) {
  const int d_model = g.value(x).dim(1);
  if (g.value(x).dim(0) != groups * seq) {
    throw DimensionError("transformer_block: input rows != groups*seq");
  }
  if (d_model % heads != 0) {
    throw DimensionError("transformer_block: d_model not divisible by heads");
  }
  const int dh = d_model / heads;
  const int rows = groups * seq;
  auto p = [&](const char* name) { return leaves.id(prefix + name); };

  const int q = g.add(g.matmul(x, p(".attn.wq")), p(".attn.bq"));
  const int k = g.matmul(x, p(".attn.wk"));
  const int v = g.add(g.matmul(x, p(".attn.wv")), p(".attn.bv"));

  std::vector<int> head_ctx;
  head_ctx.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const int qh = g.reshape(g.slice(q, 0, rows, h * dh, dh), {groups, seq, dh});
    const int kh = g.reshape(g.slice(k, 0, rows, h * dh, dh), {groups, seq, dh});
    const int vh = g.reshape(g.slice(v, 0, rows, h * dh, dh), {groups, seq, dh});
    int scores = g.scale(g.matmul(qh, kh, /*trans_b=*/true),
                         1.0 / std::sqrt(static_cast<double>(dh)));
    if (mask >= 0) scores = g.add(scores, mask);
    const int att = g.softmax(scores);
    const int ctx = g.matmul(att, vh);
    head_ctx.push_back(g.reshape(ctx, {rows, dh}));
  }
  const int merged = heads == 1 ? head_ctx[0] : g.concat_cols(head_ctx);
  const int attn_out = g.add(g.matmul(merged, p(".attn.wo")), p(".attn.bo"));
  const int y1 = g.layer_norm(g.add(x, attn_out), p(".ln1.g"), p(".ln1.b"));

  const int ff = g.add(g.matmul(g.gelu(g.add(g.matmul(y1, p(".ffn.w1")), p(".ffn.b1"))),
                                p(".ffn.w2")),
                       p(".ffn.b2"));
  return g.layer_norm(g.add(y1, ff), p(".ln2.g"), p(".ln2.b"));
}

}  // namespace cwmi
