#include <benchmark/benchmark.h>

#include <random>

#include "sigsched/scheduler.hpp"

using namespace sigsched;

namespace {

SchedulerInput instance(std::size_t phases, int clusters_per_phase, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap(0.0, 6.0), len(1.0, 8.0), w(0.05, 1.0);
  std::uniform_int_distribution<int> cnt(1, 9);
  SchedulerInput in;
  for (std::size_t p = 0; p < phases; ++p) {
    ClusterSequence seq{p, {}};
    double t = 0.0;
    for (int k = 0; k < clusters_per_phase; ++k) {
      t += gap(rng);
      const double d = len(rng);
      seq.clusters.push_back({static_cast<double>(cnt(rng)), t, t + d});
      t += d;
    }
    in.sequences.push_back(std::move(seq));
    in.weights.push_back(w(rng));
  }
  in.changeover_time = 4.0;
  in.max_green = 60.0;
  return in;
}

void BM_ScheduleTwoPhase(benchmark::State& state) {
  const auto in = instance(2, static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(schedule(in));
}
BENCHMARK(BM_ScheduleTwoPhase)->Arg(2)->Arg(5)->Arg(10)->Arg(20);

void BM_ScheduleThreePhase(benchmark::State& state) {
  const auto in = instance(3, static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(schedule(in));
}
BENCHMARK(BM_ScheduleThreePhase)->Arg(2)->Arg(4)->Arg(8);

void BM_BruteForce(benchmark::State& state) {
  auto in = instance(2, static_cast<int>(state.range(0)), 3);
  in.max_green = kUnlimitedGreen;
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_schedule(in));
}
BENCHMARK(BM_BruteForce)->Arg(2)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
