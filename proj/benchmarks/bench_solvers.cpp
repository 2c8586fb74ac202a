#include <benchmark/benchmark.h>

#include "evrptw/baselines.hpp"
#include "evrptw/instancegen.hpp"

namespace {

evrptw::Instance instance(int n, int m, std::uint64_t seed) {
  evrptw::gen::GenConfig gc;
  gc.n_customers = n;
  gc.n_stations = m;
  gc.class_spec = evrptw::gen::ClassSpec::parse("RCm");
  gc.seed = seed;
  return evrptw::gen::generate(gc);
}

void BM_Greedy(benchmark::State& state) {
  const auto in = instance(static_cast<int>(state.range(0)), 6, 1);
  for (auto _ : state) benchmark::DoNotOptimize(evrptw::baselines::greedy_construct(in, evrptw::ConstraintSet::full()));
}
BENCHMARK(BM_Greedy)->Arg(20)->Arg(100);

void BM_Exact(benchmark::State& state) {
  const auto in = instance(static_cast<int>(state.range(0)), 2, 4);
  long nodes = 0;
  for (auto _ : state) {
    const auto r = evrptw::baselines::exact_solve(in, evrptw::ConstraintSet::full());
    nodes += r.nodes;
    benchmark::DoNotOptimize(r);
  }
  state.counters["nodes"] = benchmark::Counter(static_cast<double>(nodes), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_Exact)->Arg(5)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Vns(benchmark::State& state) {
  const auto in = instance(static_cast<int>(state.range(0)), 3, 5);
  evrptw::baselines::VNSConfig c;
  c.max_iterations = 100;
  for (auto _ : state) benchmark::DoNotOptimize(evrptw::baselines::vns_solve(in, evrptw::ConstraintSet::full(), c));
}
BENCHMARK(BM_Vns)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace
