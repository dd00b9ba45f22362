#include <benchmark/benchmark.h>

#include "sigsched/experiment.hpp"
#include "sigsched/grid.hpp"
#include "sigsched/simulator.hpp"

using namespace sigsched;

namespace {

ValidatedNetwork loaded_grid(int n) {
  GridOptions g;
  g.rows = g.cols = n;
  g.link_length = 100;
  g.ramp = pm_rush_ramp(1.3);
  return validate_network(make_grid(g));
}

// One simulator step with alternating fixed control, from a warmed-up state.
void BM_SimulatorStep(benchmark::State& state) {
  const auto net = loaded_grid(static_cast<int>(state.range(0)));
  auto st = make_initial_state(net, 1);
  std::vector<std::size_t> c(net.intersections().size(), 0);
  for (int k = 0; k < 600; ++k) {
    for (auto& p : c) p = (k / 30) % 2;
    inject_vehicles(st, net);
    step(st, net, c);
  }
  for (auto _ : state) {
    for (auto& p : c) p = (st.step / 30) % 2;
    inject_vehicles(st, net);
    step(st, net, c);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SimulatorStep)->Arg(2)->Arg(4)->Arg(8);

// Full closed loop, 30 simulated minutes, per controller mode.
void BM_ClosedLoop(benchmark::State& state) {
  const auto net = loaded_grid(4);
  const auto mode = static_cast<ControllerMode>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_once(net, mode, 1, 1800, 300));
  state.SetLabel(to_string(mode));
}
BENCHMARK(BM_ClosedLoop)
    ->Arg(static_cast<int>(ControllerMode::baseline))
    ->Arg(static_cast<int>(ControllerMode::composite))
    ->Unit(benchmark::kMillisecond);

}  // namespace
