#include <benchmark/benchmark.h>

#include <random>

#include "cyclesr/degrade.hpp"
#include "cyclesr/imagecore.hpp"

using namespace cyclesr;

namespace {

Image noise_image(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(side, side);
  for (double& v : img.values()) v = u(rng);
  return img;
}

void BM_Psnr(benchmark::State& state) {
  const Image a = noise_image(state.range(0), 1), b = noise_image(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(psnr(a, b));
}
BENCHMARK(BM_Psnr)->Arg(96)->Arg(256);

void BM_Ssim(benchmark::State& state) {
  const Image a = noise_image(state.range(0), 1), b = noise_image(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(96)->Arg(256);

void BM_ShiftTolerantScore(benchmark::State& state) {
  const Image a = noise_image(128, 1), b = noise_image(128, 2);
  const ShiftProtocol protocol{static_cast<int>(state.range(0)), 4, std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(shift_tolerant_score(a, b, protocol));
}
BENCHMARK(BM_ShiftTolerantScore)->Arg(0)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_BicubicDown(benchmark::State& state) {
  const Image a = noise_image(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(bicubic_resample(a, 0.25));
}
BENCHMARK(BM_BicubicDown)->Arg(96)->Arg(480);

void BM_BicubicUp(benchmark::State& state) {
  const Image a = noise_image(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(bicubic_resample(a, 4.0));
}
BENCHMARK(BM_BicubicUp)->Arg(24)->Arg(120);

void BM_Degrade(benchmark::State& state) {
  const Image hr = procedural_image(96, 96, 3);
  const DegradationSpec spec{4, GaussianBlur{1.5, 0}, PoissonNoise{256, 0}, RandomShift{2}, ResampleFilter::kBicubic};
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(degrade(hr, spec, rng));
}
BENCHMARK(BM_Degrade);

}  // namespace
