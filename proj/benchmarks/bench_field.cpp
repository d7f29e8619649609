#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "gravalloc/far_field.hpp"
#include "gravalloc/field.hpp"
#include "gravalloc/geometry.hpp"
#include "gravalloc/rng.hpp"

using namespace gravalloc;

namespace {

StarConfig config(int d, double radius) { return sample_poisson(d, Ball{Point::zeros(d), radius}, 1.0, 2024); }

std::vector<Point> queries(int d, double halfwidth, std::size_t n) {
  Rng rng(99);
  std::vector<Point> out;
  for (std::size_t i = 0; i < n; ++i) {
    Point p(d);
    for (int k = 0; k < d; ++k) p[k] = rng.uniform(-halfwidth, halfwidth);
    out.push_back(p);
  }
  return out;
}

void BM_ExactForce(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const FieldModel model(config(d, static_cast<double>(state.range(1))));
  const auto pts = queries(d, 2.0, 256);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.force(pts[i++ % pts.size()]));
  }
  state.counters["stars"] = static_cast<double>(model.config().size());
}
BENCHMARK(BM_ExactForce)->Args({3, 10})->Args({3, 20})->Args({4, 8});

void BM_HierarchicalForce(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  auto model = std::make_shared<FieldModel>(config(d, static_cast<double>(state.range(1))));
  HierarchicalField h(model);
  h.prepare(Box{Point::zeros(d), 2.0});
  const auto pts = queries(d, 2.0, 256);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(h.force(pts[i++ % pts.size()]));
  }
}
BENCHMARK(BM_HierarchicalForce)->Args({3, 10})->Args({3, 20})->Args({4, 8});

void BM_HierarchicalPrepare(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  auto model = std::make_shared<FieldModel>(config(d, static_cast<double>(state.range(1))));
  for (auto _ : state) {
    FarFieldOptions o;
    o.threads = 1;
    HierarchicalField h(model, o);
    h.prepare(Box{Point::zeros(d), 2.0});
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_HierarchicalPrepare)->Args({3, 10})->Args({3, 20})->Unit(benchmark::kMillisecond);

}  // namespace
