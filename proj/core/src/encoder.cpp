#include "cwmi/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cwmi/rng.hpp"

namespace cwmi {

namespace {

constexpr double kMaskNegative = -1e30;
constexpr int kEncodeChunk = 128;

const char* kBinFields[] = {"mass", "radius", "mu", "e", "x", "y", "vx", "vy",
                            "angle", "length", "foot"};

std::vector<double> sinusoid_freqs(int d) {
  std::vector<double> f(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    f[static_cast<std::size_t>(j)] = std::pow(10000.0, -2.0 * (j / 2) / static_cast<double>(d));
  }
  return f;
}

// Embedding plus fixed sinusoidal position signal for one token.
void embed_token(const Tensor& table, const std::vector<double>& freqs, int token, int pos,
                 int d, double* out) {
  const double* row = table.data() + static_cast<std::size_t>(token) * d;
  for (int j = 0; j < d; ++j) {
    const double angle = pos * freqs[static_cast<std::size_t>(j)];
    out[j] = row[j] + ((j % 2 == 0) ? std::sin(angle) : std::cos(angle));
  }
}

}  // namespace

QuantRange quant_range(const std::string& field) {
  if (field == "mass") return {0.5, 5.0};
  if (field == "radius") return {0.1, 0.4};
  if (field == "mu") return {0.0, 0.8};
  if (field == "e") return {0.0, 0.95};
  if (field == "x") return {-4.0, 4.0};
  if (field == "y") return {0.0, 10.0};
  if (field == "vx") return {-8.0, 8.0};
  if (field == "vy") return {-8.0, 8.0};
  if (field == "angle") return {20.0, 45.0};
  if (field == "length") return {1.0, 6.0};
  if (field == "foot") return {0.0, 1.0};
  throw ContractError("unknown quantized field: " + field);
}

int quant_bin(double v, const QuantRange& r) {
  const double t = (v - r.lo) / (r.hi - r.lo) * kQuantBins;
  const int b = static_cast<int>(std::floor(t));
  return std::clamp(b, 0, kQuantBins - 1);
}

std::string bin_word(const std::string& field, int bin) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "_b%02d", bin);
  return field + buf;
}

Vocabulary Vocabulary::build(int capacity) {
  Vocabulary v;
  auto put = [&v](const std::string& w) {
    v.index_.emplace(w, static_cast<int>(v.words_.size()));
    v.words_.push_back(w);
  };
  put("<pad>");
  put("scene");
  put("object");
  put("drop");
  put("ramp");
  put("collide");
  put("projectile");
  for (int i = 0; i < kNumSlots; ++i) put("o" + std::to_string(i));
  put("tag_dark");
  put("tag_light");
  for (const char* field : kBinFields) {
    for (int b = 0; b < kQuantBins; ++b) put(bin_word(field, b));
  }
  if (v.size() > capacity) {
    throw VocabularyError("vocabulary needs " + std::to_string(v.size()) +
                          " entries, capacity is " + std::to_string(capacity));
  }
  return v;
}

int Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) throw VocabularyError("word not in vocabulary: " + word);
  return it->second;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) throw VocabularyError("token id out of range");
  return words_[static_cast<std::size_t>(id)];
}

std::string render_scene_text(const Scene& scene) {
  std::string out = "scene ";
  switch (scene.template_id) {
    case TemplateId::Drop: out += "drop"; break;
    case TemplateId::Ramp: out += "ramp"; break;
    case TemplateId::Collide1d: out += "collide"; break;
    case TemplateId::Projectile: out += "projectile"; break;
  }
  auto bin = [](const std::string& field, double v) {
    return " " + bin_word(field, quant_bin(v, quant_range(field)));
  };
  if (scene.env.ramp) {
    const RampSpec& r = *scene.env.ramp;
    out += bin("angle", r.angle_deg);
    out += bin("length", r.length);
    out += bin("foot", r.foot_x);
  }
  for (const ObjectSpec& o : scene.objects) {
    out += " object o" + std::to_string(o.id);
    out += o.nuisance_tag ? " tag_dark" : " tag_light";
    out += bin("mass", o.mass);
    out += bin("radius", o.radius);
    out += bin("mu", o.friction_mu);
    out += bin("e", o.restitution_e);
    out += bin("x", o.position.x);
    out += bin("y", o.position.y);
    out += bin("vx", o.velocity.x);
    out += bin("vy", o.velocity.y);
  }
  return out;
}

std::vector<TensorSpec> encoder_tensor_specs(const EncoderConfig& cfg) {
  std::vector<TensorSpec> specs;
  specs.push_back({"enc.embed", {cfg.vocab_size, cfg.d_llm}, /*trainable=*/false, Init::Normal,
                   1.0});
  for (int l = 0; l < cfg.layers; ++l) {
    append_block_specs(specs, "enc." + std::to_string(l), cfg.d_llm, 4 * cfg.d_llm,
                       /*trainable=*/false);
  }
  return specs;
}

ParameterSet init_encoder_params(const EncoderConfig& cfg) {
  ParameterSet ps = init_params(encoder_tensor_specs(cfg), cfg.init_seed);
  // An i.i.d. table makes adjacent bin words mutually orthogonal, so the
  // downstream model would have to memorize every bin separately. Lay each
  // field's bins on a frozen ramp (base + s*dir, s in [-1,1], light jitter)
  // instead, mirroring the smooth numeral geometry a pretrained backbone
  // provides. Still random, frozen and fully determined by init_seed.
  Tensor& table = ps.get("enc.embed");
  const Vocabulary vocab = Vocabulary::build(cfg.vocab_size);
  const int d = cfg.d_llm;
  Rng rng(derive_seed(cfg.init_seed, "enc.embed.ramp"));
  std::vector<double> base(static_cast<std::size_t>(d));
  std::vector<double> dir(static_cast<std::size_t>(d));
  for (const char* field : kBinFields) {
    for (double& v : base) v = rng.normal();
    for (double& v : dir) v = rng.normal();
    for (int b = 0; b < kQuantBins; ++b) {
      const double s = (2.0 * b - (kQuantBins - 1)) / (kQuantBins - 1);
      double* row =
          table.data() + static_cast<std::size_t>(vocab.id(bin_word(field, b))) * d;
      for (int j = 0; j < d; ++j) {
        row[j] = base[static_cast<std::size_t>(j)] + s * dir[static_cast<std::size_t>(j)] +
                 0.15 * rng.normal();
      }
    }
  }
  return ps;
}

SceneEncoder::SceneEncoder(const EncoderConfig& cfg)
    : SceneEncoder(cfg, init_encoder_params(cfg)) {}

SceneEncoder::SceneEncoder(const EncoderConfig& cfg, ParameterSet params)
    : cfg_(cfg), vocab_(Vocabulary::build(cfg.vocab_size)), params_(std::move(params)) {
  if (cfg_.d_llm % cfg_.heads != 0) {
    throw ConfigError("encoder d_llm must be divisible by heads");
  }
}

std::vector<int> SceneEncoder::tokenize(const std::string& text) const {
  std::vector<int> ids;
  std::istringstream in(text);
  std::string word;
  while (in >> word) ids.push_back(vocab_.id(word));
  if (ids.empty()) throw ContractError("tokenize: empty text");
  if (static_cast<int>(ids.size()) > cfg_.max_seq) {
    throw ContractError("scene renders to " + std::to_string(ids.size()) +
                        " tokens, max_seq is " + std::to_string(cfg_.max_seq));
  }
  return ids;
}

Tensor SceneEncoder::encode_scenes(const std::vector<Scene>& scenes) const {
  std::vector<std::vector<int>> rows;
  rows.reserve(scenes.size());
  for (const Scene& s : scenes) rows.push_back(tokenize(render_scene_text(s)));
  return encode_token_rows(rows);
}

Tensor SceneEncoder::encode_token_rows(const std::vector<std::vector<int>>& rows) const {
  const int n = static_cast<int>(rows.size());
  if (n == 0) throw ContractError("encode_token_rows: empty batch");
  const int d = cfg_.d_llm;
  Tensor out({n, d});

  for (int start = 0; start < n; start += kEncodeChunk) {
    const int b = std::min(kEncodeChunk, n - start);
    std::vector<std::vector<int>> chunk(rows.begin() + start, rows.begin() + start + b);
    Graph g;
    const int pooled = append_to_graph(g, chunk);
    g.forward();
    const Tensor& h = g.value(pooled);
    std::copy(h.data(), h.data() + static_cast<std::size_t>(b) * d,
              out.data() + static_cast<std::size_t>(start) * d);
  }
  if (!out.all_finite()) throw NumericError("encoder produced non-finite hidden state");
  return out;
}

int SceneEncoder::append_to_graph(Graph& g, const std::vector<std::vector<int>>& rows) const {
  const int b = static_cast<int>(rows.size());
  if (b == 0) throw ContractError("encoder: empty batch");
  int seq = 0;
  for (const auto& r : rows) {
    if (r.empty()) throw ContractError("encoder: empty token row");
    seq = std::max(seq, static_cast<int>(r.size()));
  }
  const int d = cfg_.d_llm;
  const Tensor& table = params_.get("enc.embed");
  const std::vector<double> freqs = sinusoid_freqs(d);

  Tensor embedded({b * seq, d});
  Tensor mask({b, 1, seq});
  Tensor selector({b, b * seq});
  for (int i = 0; i < b; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (int p = 0; p < seq; ++p) {
      const bool pad = p >= static_cast<int>(r.size());
      const int tok = pad ? Vocabulary::pad_id() : r[static_cast<std::size_t>(p)];
      embed_token(table, freqs, tok, p, d,
                  embedded.data() + (static_cast<std::size_t>(i) * seq + p) * d);
      mask.at(i, 0, p) = pad ? kMaskNegative : 0.0;
    }
    selector.at(i, i * seq + static_cast<int>(r.size()) - 1) = 1.0;
  }

  const auto specs = encoder_tensor_specs(cfg_);
  LeafBank leaves(g, specs);

  const int input = g.leaf({b * seq, d}, false, "enc.input");
  const int mask_leaf = g.leaf({b, 1, seq}, false, "enc.mask");
  const int sel_leaf = g.leaf({b, b * seq}, false, "enc.pool_selector");
  g.set_leaf(input, embedded);
  g.set_leaf(mask_leaf, mask);
  g.set_leaf(sel_leaf, selector);
  leaves.bind(g, params_);

  int x = input;
  for (int l = 0; l < cfg_.layers; ++l) {
    x = transformer_block(g, x, leaves, "enc." + std::to_string(l), b, seq, cfg_.heads,
                          mask_leaf);
  }
  return g.matmul(sel_leaf, x);
}

}  // namespace cwmi
