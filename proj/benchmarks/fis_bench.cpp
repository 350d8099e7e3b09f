#include <benchmark/benchmark.h>

#include "fisum/fis.hpp"
#include "fisum/random.hpp"

namespace {

using namespace fisum;

struct Setup {
  FisLayer layer;
  Batch batch;
};

Setup make(std::size_t side, SemiringTag tag) {
  FisLayerConfig config;
  config.n_trees = 8;
  config.nodes_per_tree = 3;
  config.in_channels = 3;
  config.tag = tag;
  SplitMix64 rng(3);
  Batch batch;
  for (int b = 0; b < 8; ++b) {
    DataTensor z(GridShape{side, side}, 3);
    for (double& v : z.values()) v = rng.uniform(-1, 1);
    batch.push_back(std::move(z));
  }
  return {FisLayer(config), std::move(batch)};
}

void BM_FisForward(benchmark::State& state, SemiringTag tag) {
  const Setup s = make(static_cast<std::size_t>(state.range(0)), tag);
  for (auto _ : state) benchmark::DoNotOptimize(fis_forward(s.layer, s.batch));
}

void BM_FisVjp(benchmark::State& state, SemiringTag tag) {
  const Setup s = make(static_cast<std::size_t>(state.range(0)), tag);
  FisCache cache;
  const NdArray out = fis_forward(s.layer, s.batch, &cache);
  const NdArray cot(out.shape, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(fis_vjp(s.layer, s.batch, cot, &cache));
}

BENCHMARK_CAPTURE(BM_FisForward, real, SemiringTag::Real)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_FisForward, maxplus, SemiringTag::MaxPlus)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_FisVjp, real, SemiringTag::Real)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_FisVjp, maxplus, SemiringTag::MaxPlus)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
