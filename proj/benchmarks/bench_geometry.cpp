#include <benchmark/benchmark.h>

#include <random>

#include "orthoai/case_model.hpp"
#include "orthoai/cloud.hpp"
#include "orthoai/geometry.hpp"

using namespace orthoai;

namespace {

std::vector<double> gaussian(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> v(n * dim);
  for (auto& x : v) x = g(rng);
  return v;
}

void BM_Knn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto data = gaussian(n, 64);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::knn(data, 64, k));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Knn)->Args({1000, 3})->Args({1000, 20})->Unit(benchmark::kMillisecond);

void BM_FarthestPointSample(benchmark::State& state) {
  const auto raw = gaussian(3000, 3);
  std::vector<geometry::Vec3> pts;
  for (std::size_t i = 0; i < 3000; ++i) pts.push_back({raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]});
  for (auto _ : state) benchmark::DoNotOptimize(geometry::farthest_point_sample(pts, 1000, 0));
}
BENCHMARK(BM_FarthestPointSample)->Unit(benchmark::kMillisecond);

void BM_SynthesizeCloud(benchmark::State& state) {
  const auto c = cases::generate_synthetic_case(0);
  for (auto _ : state) benchmark::DoNotOptimize(synth::synthesize_cloud(c, synth::SynthConfig{}, 0));
}
BENCHMARK(BM_SynthesizeCloud)->Unit(benchmark::kMillisecond);

}  // namespace
