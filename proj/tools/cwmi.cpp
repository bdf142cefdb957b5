#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cwmi/checkpoint.hpp"
#include "cwmi/experiments.hpp"
#include "cwmi/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 ok, 2 bad config, 3 I/O failure, 4 training divergence,
// 5 checkpoint mismatch, 1 anything else.
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;
constexpr int kExitCheckpoint = 5;

struct CommonFlags {
  std::string config_path;
  std::string data_dir;
  std::string out_dir;
};

cwmi::RunConfig resolve_config(const CommonFlags& common) {
  cwmi::RunConfig cfg;
  if (!common.config_path.empty()) cfg = cwmi::load_run_config(common.config_path);
  if (!common.data_dir.empty()) cfg.data_dir = common.data_dir;
  if (!common.out_dir.empty()) cfg.out_dir = common.out_dir;
  if (cfg.data_dir.empty()) cfg.data_dir = "data";
  if (cfg.out_dir.empty()) cfg.out_dir = "out";
  return cfg;
}

void print_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) return;
  std::cout << "== " << p.string() << "\n" << in.rdbuf() << "\n";
}

void warn_single_seed(const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 2) {
    std::cerr << "warning: single seed; treat any ordering between variants as anecdotal\n";
  }
}

void print_metrics(const std::string& tag, const cwmi::Metrics& m) {
  std::printf("%s pairs=%ld acc_f=%.4f acc_cf=%.4f acc=%.4f fspa=%.6f ccs=%.4f\n", tag.c_str(),
              m.pairs, m.acc_f, m.acc_cf, m.acc_overall, m.fspa, m.ccs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cwmi: latent physics world-model testbed"};
  app.require_subcommand(1);

  CommonFlags common;
  long pairs = -1;
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false;

  long steps = -1;
  int batch = -1;
  double lr = -1.0;
  int d_model = -1;
  std::string mode_name;
  std::uint64_t train_seed = 0;
  bool train_seed_set = false;

  std::string checkpoint_path;
  std::string split = "test";

  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<int> dims{32, 64, 128};
  std::string report_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config file (overlaid on defaults)");
    sub->add_option("--data", common.data_dir, "dataset directory");
    sub->add_option("--out", common.out_dir, "output directory");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate the scenario pair dataset");
  add_common(gen);
  gen->add_option("--pairs", pairs, "number of factual/counterfactual pairs");
  gen->add_option("--seed", gen_seed, "generator seed")->each([&](const std::string&) {
    gen_seed_set = true;
  });

  CLI::App* train = app.add_subcommand("train", "train one model on the train split");
  add_common(train);
  train->add_option("--steps", steps, "optimizer steps");
  train->add_option("--batch", batch, "pairs per batch");
  train->add_option("--lr", lr, "peak learning rate");
  train->add_option("--d-model", d_model, "latent module width");
  train->add_option("--mode", mode_name, "FULL | NO_CAUSAL | NO_PRED | NO_CPM");
  train->add_option("--seed", train_seed, "training seed")->each([&](const std::string&) {
    train_seed_set = true;
  });

  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint on one split");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  eval->add_option("--split", split, "train | val | test");

  CLI::App* ablate = app.add_subcommand("ablate", "train and score all ablation variants");
  add_common(ablate);
  ablate->add_option("--steps", steps, "optimizer steps per run");
  ablate->add_option("--seeds", seeds, "training seeds")->delimiter(',');

  CLI::App* scale = app.add_subcommand("scale", "capacity sweep over latent widths");
  add_common(scale);
  scale->add_option("--steps", steps, "optimizer steps per run");
  scale->add_option("--seeds", seeds, "training seeds")->delimiter(',');
  scale->add_option("--dims", dims, "latent widths to sweep")->delimiter(',');

  CLI::App* report = app.add_subcommand("report", "print summary tables from a run directory");
  report->add_option("--dir", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*report) {
      bool found = false;
      for (const char* name : {"ablation.txt", "scaling.txt", "report.txt"}) {
        const fs::path p = fs::path(report_dir) / name;
        if (fs::exists(p)) {
          print_file(p);
          found = true;
        }
      }
      if (fs::is_directory(report_dir)) {
        for (const auto& entry : fs::directory_iterator(report_dir)) {
          const fs::path p = entry.path() / "report.txt";
          if (entry.is_directory() && fs::exists(p)) {
            print_file(p);
            found = true;
          }
        }
      }
      if (!found) {
        std::cerr << "no summary tables under " << report_dir << "\n";
        return kExitIo;
      }
      return 0;
    }

    cwmi::RunConfig cfg = resolve_config(common);
    if (pairs > 0) cfg.gen.pairs = pairs;
    if (gen_seed_set) cfg.gen.seed = gen_seed;
    if (steps > 0) cfg.train.steps = steps;
    if (batch > 0) cfg.train.batch_pairs = batch;
    if (lr > 0) cfg.train.lr_max = lr;
    if (d_model > 0) cfg.cpm.d_model = d_model;
    if (!mode_name.empty()) cfg.train.mode = cwmi::train_mode_from_name(mode_name);
    if (train_seed_set) cfg.train.seed = train_seed;
    cwmi::validate_and_resolve(cfg);

    if (*gen) {
      const cwmi::DatasetManifest man = cwmi::run_gen_data(cfg);
      std::printf("wrote %ld pairs (train=%ld val=%ld test=%ld) to %s\n", cfg.gen.pairs,
                  man.count_train, man.count_val, man.count_test, cfg.data_dir.c_str());
      std::printf("content hash %s\n", man.content_hash.c_str());
      return 0;
    }

    if (*train) {
      const cwmi::Dataset ds = cwmi::load_dataset(cfg.data_dir);
      const long every = std::max(1L, cfg.train.steps / 20);
      cwmi::TrainArtifacts art =
          cwmi::run_train(cfg, ds, nullptr, [&](const cwmi::StepLog& l) {
            if (l.step % every == 0 || l.step + 1 == cfg.train.steps) {
              std::fprintf(stderr, "step %ld lr %.3g l_pred %.5f l_causal %.5f l_total %.5f\n",
                           l.step, l.lr, l.l_pred, l.l_causal, l.l_total);
            }
          });
      std::printf("trained %ld steps in %.1fs; checkpoint at %s\n", art.result.steps_run,
                  art.result.wall_seconds, art.result.checkpoint_path.c_str());
      const cwmi::EncodedSplit val_rows = cwmi::encode_split(art.model.encoder(), ds.val);
      const cwmi::EvalOutput ev = cwmi::evaluate_pairs(art.model, ds.val, val_rows);
      cwmi::write_eval_report((fs::path(cfg.out_dir) / "eval_val").string(), cfg, "val", ev);
      print_metrics("val", ev.metrics);
      return 0;
    }

    if (*eval) {
      const std::string dir = (fs::path(cfg.out_dir) / ("eval_" + split)).string();
      const cwmi::EvalArtifacts art = cwmi::run_eval(checkpoint_path, cfg.data_dir, split, dir);
      print_metrics(split, art.out.metrics);
      std::printf("report under %s\n", dir.c_str());
      return 0;
    }

    if (*ablate) {
      warn_single_seed(seeds);
      const cwmi::AblationSummary sum = cwmi::run_ablation(cfg, seeds);
      print_file(fs::path(cfg.out_dir) / "ablation.txt");
      (void)sum;
      return 0;
    }

    if (*scale) {
      warn_single_seed(seeds);
      const cwmi::ScalingSummary sum = cwmi::run_scaling(cfg, dims, seeds);
      print_file(fs::path(cfg.out_dir) / "scaling.txt");
      (void)sum;
      return 0;
    }
  } catch (const cwmi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const cwmi::TrainingDivergedError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const cwmi::CheckpointVersionError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const cwmi::CheckpointHashError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const cwmi::CheckpointTruncatedError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const cwmi::CheckpointShapeError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const cwmi::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const cwmi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
