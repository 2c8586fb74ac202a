#include <benchmark/benchmark.h>

#include "evrptw/instancegen.hpp"
#include "evrptw/policy.hpp"

namespace {

std::shared_ptr<const evrptw::Instance> instance(int n) {
  evrptw::gen::GenConfig gc;
  gc.n_customers = n;
  gc.n_stations = n / 8 + 2;
  gc.seed = 2;
  return std::make_shared<const evrptw::Instance>(evrptw::gen::generate(gc));
}

void BM_Encode(benchmark::State& state) {
  const auto in = instance(static_cast<int>(state.range(0)));
  const auto p = evrptw::policy::init_params(1, {static_cast<int>(state.range(1)), 8, 3});
  for (auto _ : state) benchmark::DoNotOptimize(evrptw::policy::encode(*in, p));
}
BENCHMARK(BM_Encode)->Args({10, 64})->Args({50, 64})->Args({100, 128})->Unit(benchmark::kMillisecond);

void BM_DecodeStep(benchmark::State& state) {
  const auto in = instance(static_cast<int>(state.range(0)));
  const auto p = evrptw::policy::init_params(1, {128, 8, 3});
  const auto g = evrptw::policy::encode(*in, p);
  const auto s = evrptw::env::reset(in, evrptw::ConstraintSet::full());
  const auto mask = evrptw::env::feasible_actions(s);
  const auto ctx = evrptw::policy::make_context(s);
  for (auto _ : state) benchmark::DoNotOptimize(evrptw::policy::decode_step(g, 0, ctx, mask, p));
}
BENCHMARK(BM_DecodeStep)->Arg(10)->Arg(100);

// Greedy multi-start rollout: the inference path used by the benchmarks.
void BM_GreedyRollout(benchmark::State& state) {
  const auto in = instance(static_cast<int>(state.range(0)));
  const auto p = evrptw::policy::init_params(1, {64, 8, 2});
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        evrptw::policy::rollout(in, p, evrptw::ConstraintSet::full(), evrptw::policy::DecodeMode::Greedy, 0));
  }
}
BENCHMARK(BM_GreedyRollout)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_EncodeBackward(benchmark::State& state) {
  const auto in = instance(10);
  const auto p = evrptw::policy::init_params(1, {64, 8, 2});
  for (auto _ : state) {
    evrptw::ad::Tape tape(&p.tensors);
    const auto g = evrptw::policy::encode(tape, *in, p);
    evrptw::ad::GradBuffer grads;
    tape.backward(tape.sum(g.summary), grads);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_EncodeBackward)->Unit(benchmark::kMillisecond);

}  // namespace
