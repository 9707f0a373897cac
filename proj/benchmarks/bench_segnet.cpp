#include <benchmark/benchmark.h>

#include "orthoai/case_model.hpp"
#include "orthoai/cloud.hpp"
#include "orthoai/segnet.hpp"

using namespace orthoai;

namespace {

segnet::Batch cloud_batch(std::size_t clouds) {
  segnet::Batch b;
  b.batch = clouds;
  b.dim = 6;
  for (std::size_t i = 0; i < clouds; ++i) {
    const auto c = synth::synthesize_cloud(cases::generate_synthetic_case(i), synth::SynthConfig{}, i);
    b.points = c.size();
    b.features.insert(b.features.end(), c.features.begin(), c.features.end());
    b.labels.insert(b.labels.end(), c.labels.begin(), c.labels.end());
  }
  return b;
}

void BM_ForwardEval(benchmark::State& state) {
  segnet::ModelConfig cfg;
  cfg.k = static_cast<int>(state.range(0));
  const segnet::SegModel m(cfg, 0);
  const auto b = cloud_batch(1);
  for (auto _ : state) benchmark::DoNotOptimize(segnet::forward(m, b, false));
}
BENCHMARK(BM_ForwardEval)->Arg(3)->Arg(20)->Unit(benchmark::kMillisecond);

// one minibatch of four 1000-point clouds: forward, loss and backward
void BM_LossGradients(benchmark::State& state) {
  const segnet::SegModel m({}, 0);
  const auto b = cloud_batch(4);
  for (auto _ : state) benchmark::DoNotOptimize(segnet::loss_gradients(m, b, segnet::LossConfig{}, true, 1));
}
BENCHMARK(BM_LossGradients)->Unit(benchmark::kMillisecond);

}  // namespace
