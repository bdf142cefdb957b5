#include "cwmi/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cwmi/checkpoint.hpp"
#include "cwmi/losses.hpp"
#include "cwmi/optim.hpp"
#include "cwmi/rng.hpp"

namespace cwmi {

namespace {

namespace fs = std::filesystem;

std::vector<TensorSpec> trainable_model_specs(const ModelArch& arch) {
  std::vector<TensorSpec> specs = model_tensor_specs(arch);
  std::erase_if(specs, [](const TensorSpec& s) { return !s.trainable; });
  return specs;
}

/// One reusable training graph for a fixed batch size; only leaf contents
/// change between steps.
struct TrainGraph {
  TrainGraph(const ModelArch& arch, const LossWeights& w, int batch_pairs)
      : bank(g, trainable_model_specs(arch)) {
    const int twoB = 2 * batch_pairs;
    h_all = g.leaf({twoB, arch.encoder.d_llm}, false, "batch.h");
    target_all = g.leaf({twoB, kStateDim}, false, "batch.target");
    target_delta = g.leaf({batch_pairs, kStateDim}, false, "batch.target_delta");
    const StatePredictorOut pred = build_state_predictor(g, bank, h_all, arch.cpm, arch.mode);
    s_hat = pred.s_hat;
    losses = build_losses(g, s_hat, target_all, target_delta, batch_pairs, w, arch.mode);
  }

  Graph g;
  LeafBank bank;
  int h_all = -1;
  int target_all = -1;
  int target_delta = -1;
  int s_hat = -1;
  LossNodes losses;
};

void fill_batch(TrainGraph& tg, const EncodedSplit& rows, const std::vector<long>& order,
                long pos, int B) {
  const int d_llm = rows.h_f.dim(1);
  double* h = tg.g.leaf_data(tg.h_all);
  double* t = tg.g.leaf_data(tg.target_all);
  double* dl = tg.g.leaf_data(tg.target_delta);
  for (int b = 0; b < B; ++b) {
    const long i = order[static_cast<std::size_t>(pos + b)];
    std::memcpy(h + static_cast<std::size_t>(b) * d_llm,
                rows.h_f.data() + static_cast<std::size_t>(i) * d_llm,
                sizeof(double) * static_cast<std::size_t>(d_llm));
    std::memcpy(h + static_cast<std::size_t>(B + b) * d_llm,
                rows.h_cf.data() + static_cast<std::size_t>(i) * d_llm,
                sizeof(double) * static_cast<std::size_t>(d_llm));
    for (int j = 0; j < kStateDim; ++j) {
      const double tf = rows.target_f.at(static_cast<int>(i), j);
      const double tcf = rows.target_cf.at(static_cast<int>(i), j);
      t[static_cast<std::size_t>(b) * kStateDim + j] = tf;
      t[static_cast<std::size_t>(B + b) * kStateDim + j] = tcf;
      dl[static_cast<std::size_t>(b) * kStateDim + j] = tcf - tf;
    }
  }
}

double host_pred_loss(const Tensor& s_hat, const Tensor& target_all) {
  double acc = 0.0;
  const std::int64_t n = s_hat.size();
  for (std::int64_t i = 0; i < n; ++i) acc += (s_hat.data()[i] - target_all.data()[i]) *
                                              (s_hat.data()[i] - target_all.data()[i]);
  return acc / static_cast<double>(n);
}

double host_causal_loss(const Tensor& s_hat, const Tensor& target_all, int B) {
  double acc = 0.0;
  for (int b = 0; b < B; ++b) {
    for (int j = 0; j < kStateDim; ++j) {
      const double dh = s_hat.at(B + b, j) - s_hat.at(b, j);
      const double dt = target_all.at(B + b, j) - target_all.at(b, j);
      acc += (dh - dt) * (dh - dt);
    }
  }
  return acc / static_cast<double>(B * kStateDim);
}

}  // namespace

EncodedSplit encode_split(const SceneEncoder& enc, const std::vector<ScenarioPair>& pairs) {
  if (pairs.empty()) throw ContractError("encode_split: empty split");
  std::vector<Scene> f, cf;
  f.reserve(pairs.size());
  cf.reserve(pairs.size());
  for (const ScenarioPair& p : pairs) {
    f.push_back(p.factual);
    cf.push_back(p.counterfactual);
  }
  EncodedSplit out;
  out.h_f = enc.encode_scenes(f);
  out.h_cf = enc.encode_scenes(cf);
  out.target_f = Tensor({static_cast<int>(pairs.size()), kStateDim});
  out.target_cf = Tensor({static_cast<int>(pairs.size()), kStateDim});
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (int j = 0; j < kStateDim; ++j) {
      out.target_f.at(static_cast<int>(i), j) = pairs[i].state_f[static_cast<std::size_t>(j)];
      out.target_cf.at(static_cast<int>(i), j) = pairs[i].state_cf[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

void write_train_log_csv(const std::string& path, const std::vector<StepLog>& logs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write training log: " + path);
  out << "step,lr,l_pred,l_causal,l_total,wall_ms\n";
  char line[256];
  for (const StepLog& l : logs) {
    std::snprintf(line, sizeof(line), "%ld,%.10g,%.10g,%.10g,%.10g,%.3f\n", l.step, l.lr,
                  l.l_pred, l.l_causal, l.l_total, l.wall_ms);
    out << line;
  }
}

TrainResult train_model(const RunConfig& cfg, WorldModel& model, const EncodedSplit& train_rows,
                        const std::function<void(const StepLog&)>& on_step) {
  const TrainConfig& tc = cfg.train;
  const long n = train_rows.count();
  if (n <= 0) throw ContractError("train_model: empty training rows");
  if (tc.batch_pairs > n) {
    throw ConfigError("batch size " + std::to_string(tc.batch_pairs) + " exceeds " +
                      std::to_string(n) + " training pairs");
  }
  fs::create_directories(cfg.out_dir);

  TrainGraph tg(model.arch(), tc.weights, tc.batch_pairs);
  AdamW adam(model.params(), tc);

  std::vector<long> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0L);
  long epoch = 0;
  long pos = n;  // forces a shuffle before the first batch

  TrainResult result;
  result.logs.reserve(static_cast<std::size_t>(tc.steps));
  const auto t_start = std::chrono::steady_clock::now();

  for (long step = 0; step < tc.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    if (pos + tc.batch_pairs > n) {
      Rng shuffle_rng(derive_seed(tc.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
      for (long i = n - 1; i > 0; --i) {
        const long j = static_cast<long>(shuffle_rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
      ++epoch;
      pos = 0;
    }
    fill_batch(tg, train_rows, order, pos, tc.batch_pairs);
    pos += tc.batch_pairs;

    tg.bank.bind(tg.g, model.params());
    tg.g.forward();

    const Tensor& s_hat = tg.g.value(tg.s_hat);
    const Tensor& t_all = tg.g.value(tg.target_all);
    StepLog log;
    log.step = step;
    log.lr = cosine_lr(step, tc.steps, tc.lr_max);
    log.l_total = tg.g.value(tg.losses.l_total).item();
    log.l_pred =
        tg.losses.l_pred >= 0 ? tg.g.value(tg.losses.l_pred).item() : host_pred_loss(s_hat, t_all);
    log.l_causal = tg.losses.l_causal >= 0 ? tg.g.value(tg.losses.l_causal).item()
                                           : host_causal_loss(s_hat, t_all, tc.batch_pairs);

    if (!std::isfinite(log.l_total)) {
      // Parameters have not been touched this step, so they are the last
      // state that produced a finite loss.
      const std::string path = (fs::path(cfg.out_dir) / "model.diverged.ckpt").string();
      save_checkpoint(path, cfg, model.params());
      write_train_log_csv((fs::path(cfg.out_dir) / "train_log.csv").string(), result.logs);
      throw TrainingDivergedError(step, "training loss went non-finite at step " +
                                            std::to_string(step) + "; last finite state saved to " +
                                            path);
    }

    tg.g.backward(tg.losses.l_total);
    std::vector<Tensor> grads;
    grads.reserve(tg.bank.entries().size());
    for (const auto& [name, id] : tg.bank.entries()) grads.push_back(tg.g.grad(id));
    if (tc.clip_norm > 0.0) clip_by_global_norm(grads, tc.clip_norm);
    adam.step(model.params(), grads, log.lr);

    log.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.logs.push_back(log);
    if (on_step) on_step(log);
  }

  result.steps_run = tc.steps;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  write_train_log_csv((fs::path(cfg.out_dir) / "train_log.csv").string(), result.logs);
  result.checkpoint_path = (fs::path(cfg.out_dir) / "model.ckpt").string();
  save_checkpoint(result.checkpoint_path, cfg, model.params());
  return result;
}

}  // namespace cwmi
