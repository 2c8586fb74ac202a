#include <benchmark/benchmark.h>

#include "evrptw/baselines.hpp"
#include "evrptw/env.hpp"
#include "evrptw/instancegen.hpp"
#include "evrptw/random.hpp"

namespace {

std::shared_ptr<const evrptw::Instance> instance(int n, int m) {
  evrptw::gen::GenConfig gc;
  gc.n_customers = n;
  gc.n_stations = m;
  gc.seed = 1;
  return std::make_shared<const evrptw::Instance>(evrptw::gen::generate(gc));
}

// One full random episode per iteration; reports steps per second.
void BM_EnvEpisode(benchmark::State& state) {
  const auto in = instance(static_cast<int>(state.range(0)), static_cast<int>(state.range(0) / 8 + 2));
  evrptw::Rng rng(3);
  long steps = 0;
  for (auto _ : state) {
    auto s = evrptw::env::reset(in, evrptw::ConstraintSet::full());
    while (!s.terminal) {
      const auto mask = evrptw::env::feasible_actions(s);
      std::vector<double> w(mask.begin(), mask.end());
      bool any = false;
      for (double x : w) any |= x > 0;
      if (!any) {
        evrptw::env::mark_infeasible(s);
        break;
      }
      evrptw::env::step(s, static_cast<int>(rng.categorical(w)));
      ++steps;
    }
  }
  state.counters["steps/s"] = benchmark::Counter(static_cast<double>(steps), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_EnvEpisode)->Arg(10)->Arg(50)->Arg(100);

void BM_CheckSolution(benchmark::State& state) {
  const auto in = instance(static_cast<int>(state.range(0)), 6);
  const auto sol = evrptw::baselines::greedy_construct(*in, evrptw::ConstraintSet::full());
  for (auto _ : state) {
    benchmark::DoNotOptimize(evrptw::check_solution(*in, sol.routes, evrptw::ConstraintSet::full()));
  }
}
BENCHMARK(BM_CheckSolution)->Arg(50)->Arg(100);

}  // namespace
