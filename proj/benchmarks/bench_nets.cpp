#include <benchmark/benchmark.h>

#include "cyclesr/nets.hpp"
#include "cyclesr/trainer.hpp"

using namespace cyclesr;

namespace {

ModelSpec desk_spec() {
  ModelSpec spec;
  spec.translator = {6, 16};
  spec.discriminator = {2, 16};
  spec.hr_discriminator = {2, 16};
  spec.sr = {SrVariant::kVdsrMod, 20, 16, 4};
  return spec;
}

void BM_TranslatorForward(benchmark::State& state) {
  torch::NoGradGuard guard;
  const NetworkPtr net = build_translator_generator(desk_spec(), 1);
  net->eval();
  const torch::Tensor x = torch::rand({16, 3, 16, 16});
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(x));
}
BENCHMARK(BM_TranslatorForward)->Unit(benchmark::kMillisecond);

void BM_SrForward(benchmark::State& state) {
  torch::NoGradGuard guard;
  ModelSpec spec = desk_spec();
  spec.sr.variant = state.range(0) == 0 ? SrVariant::kVdsrMod : SrVariant::kSrResNet;
  spec.sr.depth = default_sr_depth(spec.sr.variant);
  const NetworkPtr net = build_sr_network(spec, 1);
  net->eval();
  const torch::Tensor x = torch::rand({1, 3, 24, 24});
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(x));
}
BENCHMARK(BM_SrForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

TrainBatch random_batch() {
  TrainBatch b;
  b.hr = torch::rand({16, 3, 64, 64});
  b.lr_syn = torch::rand({16, 3, 16, 16});
  b.lr_real = torch::rand({16, 3, 16, 16});
  return b;
}

TrainConfig desk_config(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.batch = 16;
  c.hr_patch = 64;
  c.perceptual = "random";
  return c;
}

void BM_JointStep(benchmark::State& state) {
  Trainer trainer(desk_spec(), desk_config(state.range(0) == 0 ? TrainMode::kCycleSr : TrainMode::kCycleSrGan));
  const TrainBatch batch = random_batch();
  for (auto _ : state) benchmark::DoNotOptimize(trainer.joint_step(batch));
}
BENCHMARK(BM_JointStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BaselineStep(benchmark::State& state) {
  Trainer trainer(desk_spec(), desk_config(TrainMode::kSrSyn));
  const TrainBatch batch = random_batch();
  for (auto _ : state) benchmark::DoNotOptimize(trainer.baseline_step(batch));
}
BENCHMARK(BM_BaselineStep)->Unit(benchmark::kMillisecond);

}  // namespace
