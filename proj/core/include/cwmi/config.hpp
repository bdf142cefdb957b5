#pragma once

#include <cstdint>
#include <string>

namespace cwmi {

/// Frozen text-encoder hyperparameters. The encoder is initialized once
/// from `init_seed` and never trained.
struct EncoderConfig {
  int vocab_size = 512;
  int max_seq = 64;
  int layers = 2;
  int heads = 4;
  int d_llm = 128;
  std::uint64_t init_seed = 42;
};

/// Latent physics module hyperparameters. Slot count and per-slot width are
/// fixed by the state layout; depth/width/heads are sweepable.
struct CpmConfig {
  int layers = 4;
  int heads = 4;
  int d_model = 128;
};

enum class TrainMode : int { Full = 0, NoCausal = 1, NoPred = 2, NoCpm = 3 };

const char* train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& name);

struct LossWeights {
  double alpha = 0.5;  // prediction term
  double beta = 1.0;   // intervention-consistency term
};

struct TrainConfig {
  long steps = 5000;
  int batch_pairs = 64;
  double lr_max = 3e-4;  // cosine-decayed to zero, no warmup
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables gradient clipping
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::Full;
  LossWeights weights;
};

struct GenConfig {
  long pairs = 2000;
  double split_train = 0.8;
  double split_val = 0.1;
  double split_test = 0.1;
  std::uint64_t seed = 7;
  double rho_train = 0.95;  // P(nuisance tag == heavy-side) on train
  double rho_eval = 0.5;    // decorrelated tag on val/test
};

/// Everything a run needs; echoed verbatim into checkpoints, dataset
/// manifests and evaluation reports.
struct RunConfig {
  GenConfig gen;
  EncoderConfig encoder;
  CpmConfig cpm;
  TrainConfig train;
  std::string data_dir;
  std::string out_dir;
};

/// Throws ConfigError on out-of-range or contradictory values. Also applies
/// mode-implied loss weights (NO_CAUSAL forces beta = 0, NO_PRED alpha = 0)
/// so the echoed config matches what actually runs.
void validate_and_resolve(RunConfig& cfg);

std::string to_json_string(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

/// Reads a JSON config file and overlays it on defaults.
RunConfig load_run_config(const std::string& path);

std::string split_counts_str(const GenConfig& gen);
long split_count_train(const GenConfig& gen);
long split_count_val(const GenConfig& gen);
long split_count_test(const GenConfig& gen);

}  // namespace cwmi
