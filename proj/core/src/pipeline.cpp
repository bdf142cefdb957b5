#include "cwmi/pipeline.hpp"

#include "cwmi/checkpoint.hpp"

namespace cwmi {

DatasetManifest run_gen_data(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) throw ConfigError("data_dir is required to generate a dataset");
  DatasetGenerator gen(cfg.gen);
  return gen.generate(cfg.data_dir);
}

TrainArtifacts run_train(const RunConfig& cfg, const Dataset& ds,
                         const EncodedSplit* cached_train,
                         const std::function<void(const StepLog&)>& on_step) {
  const ModelArch arch{cfg.encoder, cfg.cpm, cfg.train.mode};
  WorldModel model(arch, cfg.train.seed);
  EncodedSplit local;
  if (!cached_train) local = encode_split(model.encoder(), ds.train);
  const EncodedSplit& rows = cached_train ? *cached_train : local;
  if (rows.count() != static_cast<long>(ds.train.size())) {
    throw ContractError("cached training rows do not match the train split");
  }
  TrainResult result = train_model(cfg, model, rows, on_step);
  return {std::move(model), std::move(result)};
}

EvalArtifacts run_eval(const std::string& checkpoint_path, const std::string& data_dir,
                       const std::string& split, const std::string& report_dir,
                       const EncodedSplit* cached_rows) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const ModelArch arch{ckpt.config.encoder, ckpt.config.cpm, ckpt.config.train.mode};
  check_params_match(ckpt.params, model_tensor_specs(arch));
  WorldModel model(arch, std::move(ckpt.params));

  Dataset ds = load_dataset(data_dir);
  const std::vector<ScenarioPair>& pairs = ds.split(split);
  if (pairs.empty()) throw ContractError("split '" + split + "' is empty");
  EncodedSplit local;
  if (!cached_rows) local = encode_split(model.encoder(), pairs);
  const EncodedSplit& rows = cached_rows ? *cached_rows : local;

  EvalArtifacts art{ckpt.config, evaluate_pairs(model, pairs, rows)};
  write_eval_report(report_dir, ckpt.config, split, art.out);
  return art;
}

}  // namespace cwmi
