#include "cwmi/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

namespace cwmi {

namespace {

namespace fs = std::filesystem;

constexpr const char* kModes[4] = {"FULL", "NO_CAUSAL", "NO_PRED", "NO_CPM"};

Metrics mean_metrics(const std::vector<Metrics>& ms) {
  Metrics out;
  if (ms.empty()) return out;
  out.pairs = ms.front().pairs;
  for (const Metrics& m : ms) {
    out.acc_f += m.acc_f;
    out.acc_cf += m.acc_cf;
    out.acc_overall += m.acc_overall;
    out.fspa += m.fspa;
    out.ccs += m.ccs;
  }
  const double n = static_cast<double>(ms.size());
  out.acc_f /= n;
  out.acc_cf /= n;
  out.acc_overall /= n;
  out.fspa /= n;
  out.ccs /= n;
  return out;
}

/// Trains and scores each config; index i uses protos[i] as the record
/// skeleton. Runs are independent, so they may fan out across threads.
std::vector<RunRecord> execute_runs(const Dataset& ds, const EncodedSplit& train_rows,
                                    const EncodedSplit& test_rows,
                                    const std::vector<RunConfig>& cfgs,
                                    std::vector<RunRecord> protos) {
  std::vector<RunRecord> out(cfgs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfgs.size()) return;
      try {
        RunRecord rec = protos[i];
        TrainArtifacts art = run_train(cfgs[i], ds, &train_rows);
        rec.trainable_params = art.model.params().trainable_count();
        rec.steps = cfgs[i].train.steps;
        rec.train_seconds = art.result.wall_seconds;
        rec.final_l_total = art.result.logs.empty() ? 0.0 : art.result.logs.back().l_total;
        EvalOutput ev = evaluate_pairs(art.model, ds.test, test_rows);
        write_eval_report((fs::path(cfgs[i].out_dir) / "eval_test").string(), cfgs[i], "test",
                          ev);
        rec.test = ev.metrics;
        out[i] = std::move(rec);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int threads = std::min<int>(experiment_threads(), static_cast<int>(cfgs.size()));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

void write_run_table(const std::string& csv_path, const std::string& txt_path,
                     const std::vector<RunRecord>& runs,
                     const std::vector<std::pair<std::string, Metrics>>& means,
                     const char* group_header) {
  {
    std::ofstream f(csv_path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + csv_path);
    f << group_header
      << ",seed,d_model,trainable_params,steps,train_seconds,final_l_total,pairs,acc_f,acc_cf,"
         "acc_overall,fspa,ccs\n";
    char line[512];
    for (const RunRecord& r : runs) {
      std::snprintf(line, sizeof(line),
                    "%s,%llu,%d,%lld,%ld,%.1f,%.8g,%ld,%.6f,%.6f,%.6f,%.8g,%.6f\n",
                    r.mode.c_str(), static_cast<unsigned long long>(r.seed), r.d_model,
                    static_cast<long long>(r.trainable_params), r.steps, r.train_seconds,
                    r.final_l_total, r.test.pairs, r.test.acc_f, r.test.acc_cf,
                    r.test.acc_overall, r.test.fspa, r.test.ccs);
      f << line;
    }
    for (const auto& [key, m] : means) {
      std::snprintf(line, sizeof(line), "%s,mean,,,,,,%ld,%.6f,%.6f,%.6f,%.8g,%.6f\n",
                    key.c_str(), m.pairs, m.acc_f, m.acc_cf, m.acc_overall, m.fspa, m.ccs);
      f << line;
    }
  }
  {
    std::ofstream f(txt_path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + txt_path);
    char line[512];
    std::snprintf(line, sizeof(line), "%-12s %-6s %8s %8s %8s %8s %12s %8s\n", group_header,
                  "seed", "acc_f", "acc_cf", "acc", "ccs", "fspa", "sec");
    f << line;
    for (const RunRecord& r : runs) {
      std::snprintf(line, sizeof(line), "%-12s %-6llu %8.4f %8.4f %8.4f %8.4f %12.6f %8.1f\n",
                    r.mode.c_str(), static_cast<unsigned long long>(r.seed), r.test.acc_f,
                    r.test.acc_cf, r.test.acc_overall, r.test.ccs, r.test.fspa,
                    r.train_seconds);
      f << line;
    }
    f << "\n";
    for (const auto& [key, m] : means) {
      std::snprintf(line, sizeof(line), "%-12s %-6s %8.4f %8.4f %8.4f %8.4f %12.6f\n",
                    key.c_str(), "mean", m.acc_f, m.acc_cf, m.acc_overall, m.ccs, m.fspa);
      f << line;
    }
  }
}

}  // namespace

int experiment_threads() {
  const char* env = std::getenv("CWMI_THREADS");
  if (!env || !*env) return 1;
  const int v = std::atoi(env);
  return std::clamp(v, 1, 64);
}

AblationSummary run_ablation(const RunConfig& base, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ContractError("run_ablation: no seeds");
  const Dataset ds = load_dataset(base.data_dir);
  SceneEncoder enc(base.encoder);
  const EncodedSplit train_rows = encode_split(enc, ds.train);
  const EncodedSplit test_rows = encode_split(enc, ds.test);

  std::vector<RunConfig> cfgs;
  std::vector<RunRecord> protos;
  for (const char* mode : kModes) {
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.train.mode = train_mode_from_name(mode);
      cfg.train.seed = seed;
      cfg.out_dir = (fs::path(base.out_dir) / "ablation" /
                     (std::string(mode) + "_s" + std::to_string(seed)))
                        .string();
      validate_and_resolve(cfg);
      cfgs.push_back(std::move(cfg));
      RunRecord rec;
      rec.mode = mode;
      rec.seed = seed;
      rec.d_model = base.cpm.d_model;
      protos.push_back(std::move(rec));
    }
  }

  AblationSummary sum;
  sum.runs = execute_runs(ds, train_rows, test_rows, cfgs, std::move(protos));
  for (const char* mode : kModes) {
    std::vector<Metrics> ms;
    for (const RunRecord& r : sum.runs) {
      if (r.mode == mode) ms.push_back(r.test);
    }
    sum.mean_by_mode[mode] = mean_metrics(ms);
  }

  std::vector<std::pair<std::string, Metrics>> means;
  for (const char* mode : kModes) means.emplace_back(mode, sum.mean_by_mode.at(mode));
  fs::create_directories(base.out_dir);
  write_run_table((fs::path(base.out_dir) / "ablation.csv").string(),
                  (fs::path(base.out_dir) / "ablation.txt").string(), sum.runs, means, "mode");
  return sum;
}

ScalingSummary run_scaling(const RunConfig& base, std::vector<int> dims,
                           const std::vector<std::uint64_t>& seeds) {
  if (dims.empty() || seeds.empty()) throw ContractError("run_scaling: empty sweep");
  std::sort(dims.begin(), dims.end(), [&](int a, int b) {
    CpmConfig ca = base.cpm, cb = base.cpm;
    ca.d_model = a;
    cb.d_model = b;
    return cpm_param_count(ca) < cpm_param_count(cb);
  });

  const Dataset ds = load_dataset(base.data_dir);
  SceneEncoder enc(base.encoder);
  const EncodedSplit train_rows = encode_split(enc, ds.train);
  const EncodedSplit test_rows = encode_split(enc, ds.test);

  std::vector<RunConfig> cfgs;
  std::vector<RunRecord> protos;
  for (int d : dims) {
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.train.mode = TrainMode::Full;
      cfg.train.seed = seed;
      cfg.cpm.d_model = d;
      cfg.out_dir = (fs::path(base.out_dir) / "scaling" /
                     ("d" + std::to_string(d) + "_s" + std::to_string(seed)))
                        .string();
      validate_and_resolve(cfg);
      cfgs.push_back(std::move(cfg));
      RunRecord rec;
      rec.mode = "FULL";
      rec.seed = seed;
      rec.d_model = d;
      protos.push_back(std::move(rec));
    }
  }

  ScalingSummary sum;
  sum.runs = execute_runs(ds, train_rows, test_rows, cfgs, std::move(protos));
  std::vector<std::pair<std::string, Metrics>> means;
  for (int d : dims) {
    std::vector<Metrics> ms;
    for (const RunRecord& r : sum.runs) {
      if (r.d_model == d) ms.push_back(r.test);
    }
    CpmConfig cc = base.cpm;
    cc.d_model = d;
    ScalePoint pt;
    pt.d_model = d;
    pt.cpm_params = cpm_param_count(cc);
    pt.test_mean = mean_metrics(ms);
    sum.points.push_back(pt);
    means.emplace_back("d" + std::to_string(d), pt.test_mean);
  }

  fs::create_directories(base.out_dir);
  write_run_table((fs::path(base.out_dir) / "scaling.csv").string(),
                  (fs::path(base.out_dir) / "scaling.txt").string(), sum.runs, means, "mode");
  return sum;
}

}  // namespace cwmi
