#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cwmi/pipeline.hpp"

namespace cwmi {

struct RunRecord {
  std::string mode;
  std::uint64_t seed = 0;
  int d_model = 0;
  std::int64_t trainable_params = 0;
  long steps = 0;
  double train_seconds = 0.0;
  double final_l_total = 0.0;
  Metrics test;
};

struct AblationSummary {
  std::vector<RunRecord> runs;  // mode-major, seed-minor
  std::map<std::string, Metrics> mean_by_mode;
};

/// Trains FULL, NO_CAUSAL, NO_PRED and NO_CPM with every seed on the
/// dataset under base.data_dir and scores the test split. Pooled encoder
/// rows are computed once and shared across runs. Per-run artifacts land
/// under <out_dir>/ablation/<MODE>_s<seed>; ablation.csv and ablation.txt
/// summarize at <out_dir>.
AblationSummary run_ablation(const RunConfig& base, const std::vector<std::uint64_t>& seeds);

struct ScalePoint {
  int d_model = 0;
  std::int64_t cpm_params = 0;
  Metrics test_mean;
};

struct ScalingSummary {
  std::vector<RunRecord> runs;
  std::vector<ScalePoint> points;  // ascending capacity
};

/// FULL-mode capacity sweep over latent module widths. Writes scaling.csv
/// and scaling.txt at <out_dir>, runs under <out_dir>/scaling/.
ScalingSummary run_scaling(const RunConfig& base, std::vector<int> dims,
                           const std::vector<std::uint64_t>& seeds);

/// Run-level fan-out width, read from the CWMI_THREADS environment variable
/// (default 1). Individual runs stay single-threaded either way.
int experiment_threads();

}  // namespace cwmi
