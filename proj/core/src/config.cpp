#include "cwmi/config.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cwmi/errors.hpp"

namespace cwmi {

namespace {

using ordered_json = nlohmann::ordered_json;

template <typename T>
void pull(const ordered_json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

ordered_json gen_to_json(const GenConfig& g) {
  ordered_json j;
  j["pairs"] = g.pairs;
  j["split_train"] = g.split_train;
  j["split_val"] = g.split_val;
  j["split_test"] = g.split_test;
  j["seed"] = g.seed;
  j["rho_train"] = g.rho_train;
  j["rho_eval"] = g.rho_eval;
  return j;
}

void gen_from_json(const ordered_json& j, GenConfig& g) {
  pull(j, "pairs", g.pairs);
  pull(j, "split_train", g.split_train);
  pull(j, "split_val", g.split_val);
  pull(j, "split_test", g.split_test);
  pull(j, "seed", g.seed);
  pull(j, "rho_train", g.rho_train);
  pull(j, "rho_eval", g.rho_eval);
}

}  // namespace

const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::Full: return "FULL";
    case TrainMode::NoCausal: return "NO_CAUSAL";
    case TrainMode::NoPred: return "NO_PRED";
    case TrainMode::NoCpm: return "NO_CPM";
  }
  return "?";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "FULL") return TrainMode::Full;
  if (name == "NO_CAUSAL") return TrainMode::NoCausal;
  if (name == "NO_PRED") return TrainMode::NoPred;
  if (name == "NO_CPM") return TrainMode::NoCpm;
  throw ConfigError("unknown training mode: " + name +
                    " (expected FULL, NO_CAUSAL, NO_PRED or NO_CPM)");
}

void validate_and_resolve(RunConfig& cfg) {
  if (cfg.gen.pairs <= 0) throw ConfigError("gen.pairs must be positive");
  const double ssum = cfg.gen.split_train + cfg.gen.split_val + cfg.gen.split_test;
  if (cfg.gen.split_train < 0 || cfg.gen.split_val < 0 || cfg.gen.split_test < 0 ||
      std::abs(ssum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  if (cfg.gen.rho_train < 0 || cfg.gen.rho_train > 1 || cfg.gen.rho_eval < 0 ||
      cfg.gen.rho_eval > 1) {
    throw ConfigError("tag correlation rho must lie in [0, 1]");
  }
  if (cfg.encoder.d_llm <= 0 || cfg.encoder.heads <= 0 ||
      cfg.encoder.d_llm % cfg.encoder.heads != 0) {
    throw ConfigError("encoder d_llm must be a positive multiple of heads");
  }
  if (cfg.encoder.layers <= 0 || cfg.encoder.vocab_size <= 0 || cfg.encoder.max_seq <= 0) {
    throw ConfigError("encoder layers, vocab_size and max_seq must be positive");
  }
  if (cfg.cpm.d_model <= 0 || cfg.cpm.heads <= 0 || cfg.cpm.d_model % cfg.cpm.heads != 0) {
    throw ConfigError("cpm d_model must be a positive multiple of heads");
  }
  if (cfg.cpm.layers <= 0) throw ConfigError("cpm.layers must be positive");
  if (cfg.train.steps <= 0) throw ConfigError("train.steps must be positive");
  if (cfg.train.batch_pairs <= 0) throw ConfigError("train.batch_pairs must be positive");
  if (cfg.train.lr_max <= 0) throw ConfigError("train.lr_max must be positive");
  if (cfg.train.weight_decay < 0) throw ConfigError("train.weight_decay must be >= 0");
  if (cfg.train.clip_norm < 0) throw ConfigError("train.clip_norm must be >= 0");
  if (cfg.train.adam_beta1 < 0 || cfg.train.adam_beta1 >= 1 || cfg.train.adam_beta2 < 0 ||
      cfg.train.adam_beta2 >= 1 || cfg.train.adam_eps <= 0) {
    throw ConfigError("adam betas must lie in [0,1) and eps must be positive");
  }
  if (cfg.train.weights.alpha < 0 || cfg.train.weights.beta < 0) {
    throw ConfigError("loss weights must be >= 0");
  }
  // Ablation modes imply their loss weights; resolve them here so the
  // echoed config states what actually runs.
  if (cfg.train.mode == TrainMode::NoCausal) cfg.train.weights.beta = 0.0;
  if (cfg.train.mode == TrainMode::NoPred) cfg.train.weights.alpha = 0.0;
  if (cfg.train.weights.alpha == 0.0 && cfg.train.weights.beta == 0.0) {
    throw ConfigError("at least one loss weight must be positive");
  }
}

std::string to_json_string(const RunConfig& cfg) {
  ordered_json j;
  j["gen"] = gen_to_json(cfg.gen);
  ordered_json enc;
  enc["vocab_size"] = cfg.encoder.vocab_size;
  enc["max_seq"] = cfg.encoder.max_seq;
  enc["layers"] = cfg.encoder.layers;
  enc["heads"] = cfg.encoder.heads;
  enc["d_llm"] = cfg.encoder.d_llm;
  enc["init_seed"] = cfg.encoder.init_seed;
  j["encoder"] = std::move(enc);
  ordered_json cpm;
  cpm["layers"] = cfg.cpm.layers;
  cpm["heads"] = cfg.cpm.heads;
  cpm["d_model"] = cfg.cpm.d_model;
  j["cpm"] = std::move(cpm);
  ordered_json tr;
  tr["steps"] = cfg.train.steps;
  tr["batch_pairs"] = cfg.train.batch_pairs;
  tr["lr_max"] = cfg.train.lr_max;
  tr["weight_decay"] = cfg.train.weight_decay;
  tr["adam_beta1"] = cfg.train.adam_beta1;
  tr["adam_beta2"] = cfg.train.adam_beta2;
  tr["adam_eps"] = cfg.train.adam_eps;
  tr["clip_norm"] = cfg.train.clip_norm;
  tr["seed"] = cfg.train.seed;
  tr["mode"] = train_mode_name(cfg.train.mode);
  tr["alpha"] = cfg.train.weights.alpha;
  tr["beta"] = cfg.train.weights.beta;
  j["train"] = std::move(tr);
  j["data_dir"] = cfg.data_dir;
  j["out_dir"] = cfg.out_dir;
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError("config JSON parse failure: " + std::string(e.what()));
  }
  RunConfig cfg;
  if (j.contains("gen")) gen_from_json(j.at("gen"), cfg.gen);
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    pull(e, "vocab_size", cfg.encoder.vocab_size);
    pull(e, "max_seq", cfg.encoder.max_seq);
    pull(e, "layers", cfg.encoder.layers);
    pull(e, "heads", cfg.encoder.heads);
    pull(e, "d_llm", cfg.encoder.d_llm);
    pull(e, "init_seed", cfg.encoder.init_seed);
  }
  if (j.contains("cpm")) {
    const auto& c = j.at("cpm");
    pull(c, "layers", cfg.cpm.layers);
    pull(c, "heads", cfg.cpm.heads);
    pull(c, "d_model", cfg.cpm.d_model);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    pull(t, "steps", cfg.train.steps);
    pull(t, "batch_pairs", cfg.train.batch_pairs);
    pull(t, "lr_max", cfg.train.lr_max);
    pull(t, "weight_decay", cfg.train.weight_decay);
    pull(t, "adam_beta1", cfg.train.adam_beta1);
    pull(t, "adam_beta2", cfg.train.adam_beta2);
    pull(t, "adam_eps", cfg.train.adam_eps);
    pull(t, "clip_norm", cfg.train.clip_norm);
    pull(t, "seed", cfg.train.seed);
    if (t.contains("mode")) cfg.train.mode = train_mode_from_name(t.at("mode").get<std::string>());
    pull(t, "alpha", cfg.train.weights.alpha);
    pull(t, "beta", cfg.train.weights.beta);
  }
  pull(j, "data_dir", cfg.data_dir);
  pull(j, "out_dir", cfg.out_dir);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return run_config_from_json(text);
}

long split_count_val(const GenConfig& gen) {
  return std::llround(static_cast<double>(gen.pairs) * gen.split_val);
}
long split_count_test(const GenConfig& gen) {
  return std::llround(static_cast<double>(gen.pairs) * gen.split_test);
}
long split_count_train(const GenConfig& gen) {
  return gen.pairs - split_count_val(gen) - split_count_test(gen);
}
std::string split_counts_str(const GenConfig& gen) {
  return std::to_string(split_count_train(gen)) + "/" + std::to_string(split_count_val(gen)) +
         "/" + std::to_string(split_count_test(gen));
}

}  // namespace cwmi
