#include <benchmark/benchmark.h>

#include <memory>

#include "cwmi/cpm.hpp"
#include "cwmi/losses.hpp"
#include "cwmi/optim.hpp"
#include "cwmi/rng.hpp"
#include "cwmi/scenario.hpp"
#include "cwmi/trainer.hpp"

namespace {

using namespace cwmi;

void bm_simulate(benchmark::State& state) {
  const auto t = static_cast<TemplateId>(state.range(0));
  const Scene scene = sample_scene(t, 123);
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(scene));
  }
  state.SetLabel(template_name(t));
}
BENCHMARK(bm_simulate)->Arg(0)->Arg(1)->Arg(2)->Arg(3);

void bm_make_pair(benchmark::State& state) {
  DatasetGenerator gen(GenConfig{});
  long i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen.make_pair(i % 64));
    ++i;
  }
}
BENCHMARK(bm_make_pair);

void bm_matmul(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  Graph g;
  const int a = g.leaf({rows, 128}, true, "a");
  const int b = g.leaf({128, 128}, true, "b");
  g.matmul(a, b);
  Rng rng(7);
  for (double* p : {g.leaf_data(a), g.leaf_data(b)}) {
    for (int i = 0; i < rows * 128; ++i) p[i] = rng.normal();
  }
  for (auto _ : state) {
    g.forward();
    benchmark::DoNotOptimize(g.value(2));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows) * 128 * 128);
}
BENCHMARK(bm_matmul)->Arg(128)->Arg(512);

struct StepFixture {
  StepFixture(int batch_pairs, int d_model) {
    arch.cpm.d_model = d_model;
    model = std::make_unique<WorldModel>(arch, 1);
    const int twoB = 2 * batch_pairs;
    std::vector<TensorSpec> specs;
    for (const TensorSpec& s : model_tensor_specs(arch)) {
      if (s.trainable) specs.push_back(s);
    }
    bank = std::make_unique<LeafBank>(g, specs);
    h = g.leaf({twoB, arch.encoder.d_llm}, false, "h");
    target = g.leaf({twoB, kStateDim}, false, "t");
    delta = g.leaf({batch_pairs, kStateDim}, false, "d");
    Rng rng(3);
    for (int i = 0; i < twoB * arch.encoder.d_llm; ++i) g.leaf_data(h)[i] = rng.normal();
    for (int i = 0; i < twoB * kStateDim; ++i) g.leaf_data(target)[i] = rng.normal();
    for (int i = 0; i < batch_pairs * kStateDim; ++i) g.leaf_data(delta)[i] = rng.normal();
    const StatePredictorOut pred = build_state_predictor(g, *bank, h, arch.cpm, TrainMode::Full);
    losses = build_losses(g, pred.s_hat, target, delta, batch_pairs, LossWeights{}, TrainMode::Full);
    bank->bind(g, model->params());
  }

  ModelArch arch;
  std::unique_ptr<WorldModel> model;
  Graph g;
  std::unique_ptr<LeafBank> bank;
  int h = -1, target = -1, delta = -1;
  LossNodes losses;
};

void bm_forward(benchmark::State& state) {
  StepFixture fx(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) {
    fx.g.forward();
    benchmark::DoNotOptimize(fx.g.value(fx.losses.l_total));
  }
}
BENCHMARK(bm_forward)->Args({64, 128})->Args({64, 32});

void bm_train_step(benchmark::State& state) {
  StepFixture fx(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  TrainConfig tc;
  AdamW adam(fx.model->params(), tc);
  for (auto _ : state) {
    fx.bank->bind(fx.g, fx.model->params());
    fx.g.forward();
    fx.g.backward(fx.losses.l_total);
    std::vector<Tensor> grads;
    for (const auto& [name, id] : fx.bank->entries()) grads.push_back(fx.g.grad(id));
    adam.step(fx.model->params(), grads, 1e-4);
  }
}
BENCHMARK(bm_train_step)->Args({64, 128})->Args({16, 128})->Unit(benchmark::kMillisecond);

void bm_encode(benchmark::State& state) {
  SceneEncoder enc(EncoderConfig{});
  std::vector<Scene> scenes;
  for (int i = 0; i < 32; ++i) scenes.push_back(sample_scene(static_cast<TemplateId>(i % 4), i));
  for (auto _ : state) {
    benchmark::DoNotOptimize(enc.encode_scenes(scenes));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(bm_encode);

}  // namespace

BENCHMARK_MAIN();
