#include <benchmark/benchmark.h>

#include <memory>

#include "gravalloc/allocation.hpp"
#include "gravalloc/far_field.hpp"
#include "gravalloc/field.hpp"
#include "gravalloc/flow.hpp"
#include "gravalloc/geometry.hpp"
#include "gravalloc/rng.hpp"

using namespace gravalloc;

namespace {

void BM_FlowToCapture(benchmark::State& state) {
  const int d = 3;
  auto model = std::make_shared<FieldModel>(sample_poisson(d, Ball{Point::zeros(d), 12.0}, 1.0, 7));
  HierarchicalField h(model);
  h.prepare(Box{Point::zeros(d), 3.0});
  Rng rng(5);
  for (auto _ : state) {
    Point x(d);
    for (int k = 0; k < d; ++k) x[k] = rng.uniform(-1.0, 1.0);
    benchmark::DoNotOptimize(integrate_flow(h, x));
  }
}
BENCHMARK(BM_FlowToCapture)->Unit(benchmark::kMicrosecond);

void BM_AllocateGrid(benchmark::State& state) {
  const int d = 3;
  auto model = std::make_shared<FieldModel>(sample_poisson(d, Ball{Point::zeros(d), 12.0}, 1.0, 7));
  HierarchicalField h(model);
  h.prepare(Box{Point::zeros(d), 3.0});
  const GridSpec grid{Box{Point::zeros(d), 2.0}, static_cast<int>(state.range(0))};
  for (auto _ : state) {
    benchmark::DoNotOptimize(allocate_grid(h, grid, {}, 1));
  }
}
BENCHMARK(BM_AllocateGrid)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_StableMarriage(benchmark::State& state) {
  const int d = 3;
  const StarConfig cfg = sample_poisson(d, Box{Point::zeros(d), 1.8}, 1.0, 3);
  const GridSpec grid{Box{Point::zeros(d), 2.0}, static_cast<int>(state.range(0))};
  for (auto _ : state) {
    benchmark::DoNotOptimize(stable_marriage_allocate(cfg, grid));
  }
}
BENCHMARK(BM_StableMarriage)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
