#include <gtest/gtest.h>

#include <cmath>

#include "sigsched/error.hpp"
#include "sigsched/grid.hpp"
#include "sigsched/network.hpp"
#include "sigsched/simulator.hpp"

using namespace sigsched;

namespace {

// W->X->E (phase 0) and S->X->N (phase 1), 100 m links at 10 m/s.
NetworkSpec crossing(double sat = 0.5, double changeover = 0.0, double rate_vph = 0.0, int capacity = 50) {
  NetworkSpec s;
  s.boundaries = {"W", "E", "S", "N"};
  auto link = [&](const std::string& id, const std::string& from, const std::string& to) {
    return LinkSpec{id, from, to, 100.0, 10.0, sat, capacity};
  };
  s.links = {link("w_in", "W", "X"), link("e_out", "X", "E"), link("s_in", "S", "X"), link("n_out", "X", "N")};
  IntersectionSpec x;
  x.id = "X";
  x.changeover_time = changeover;
  x.max_green = 1000;
  x.phases = {{0, {{"w_in", "e_out"}}, EdgeClass::h}, {1, {{"s_in", "n_out"}}, EdgeClass::v}};
  s.intersections = {x};
  s.demand = {{"w_in", {{0, 1e6, rate_vph}}, {}}};
  return s;
}

void run_steps(SimState& st, const ValidatedNetwork& net, int n, std::size_t phase) {
  const std::vector<std::size_t> c{phase};
  for (int i = 0; i < n; ++i) step(st, net, c);
}

std::size_t link_index(const ValidatedNetwork& net, const std::string& id) { return *net.find_link(id); }

}  // namespace

TEST(Simulator, EmptyNetworkOnlyAdvancesClock) {
  const auto net = validate_network(crossing());
  auto st = make_initial_state(net, 1);
  run_steps(st, net, 10, 0);
  EXPECT_DOUBLE_EQ(st.clock, 10.0);
  EXPECT_EQ(st.vehicles.size(), 0u);
  EXPECT_EQ(st.counters.generated, 0u);
  for (const auto& l : st.links) EXPECT_EQ(l.occupancy(), 0);
}

TEST(Simulator, VehicleReachesStopLineAfterTenSteps) {
  const auto net = validate_network(crossing());
  auto st = make_initial_state(net, 1);
  const auto w = link_index(net, "w_in");
  place_vehicle(st, net, {w, link_index(net, "e_out")});
  run_steps(st, net, 9, 1);
  EXPECT_TRUE(st.links[w].queue.empty());
  run_steps(st, net, 1, 1);
  EXPECT_EQ(st.links[w].queue.size(), 1u);
}

TEST(Simulator, DischargeAccumulatorHandArithmetic) {
  const auto net = validate_network(crossing(0.5));
  auto st = make_initial_state(net, 1);
  const auto w = link_index(net, "w_in");
  for (int i = 0; i < 5; ++i) place_vehicle(st, net, {w, link_index(net, "e_out")}, true);
  run_steps(st, net, 4, 0);
  EXPECT_EQ(st.links[w].queue.size(), 3u);
  EXPECT_EQ(st.discharged[0][0], 2u);
}

TEST(Simulator, DischargeMatchesFloorOfRateTimesGreen) {
  for (double sat : {0.3, 0.45, 0.7, 1.0 / 3.0}) {
    const auto net = validate_network(crossing(sat));
    auto st = make_initial_state(net, 1);
    const auto w = link_index(net, "w_in");
    for (int i = 0; i < 40; ++i) place_vehicle(st, net, {w, link_index(net, "e_out")}, true);
    for (int g = 1; g <= 30; ++g) {
      run_steps(st, net, 1, 0);
      EXPECT_EQ(st.discharged[0][0], static_cast<std::uint64_t>(std::floor(sat * g + 1e-9))) << sat << " " << g;
    }
  }
}

TEST(Simulator, FreeFlowTripHasZeroDelay) {
  const auto net = validate_network(crossing(1.0));
  auto st = make_initial_state(net, 1);
  place_vehicle(st, net, {link_index(net, "w_in"), link_index(net, "e_out")});
  run_steps(st, net, 30, 0);
  ASSERT_EQ(st.exited.size(), 1u);
  EXPECT_DOUBLE_EQ(st.exited[0].delay, 0.0);
  EXPECT_DOUBLE_EQ(st.exited[0].free_flow, 20.0);
}

TEST(Simulator, RedLightHoldIsCountedAsDelay) {
  const auto net = validate_network(crossing(1.0));
  auto st = make_initial_state(net, 1);
  place_vehicle(st, net, {link_index(net, "w_in"), link_index(net, "e_out")});
  // at the stop line from t=10; green again for the step ending at t=40
  run_steps(st, net, 39, 1);
  run_steps(st, net, 30, 0);
  ASSERT_EQ(st.exited.size(), 1u);
  EXPECT_DOUBLE_EQ(st.exited[0].delay, 30.0);
}

TEST(Simulator, ChangeoverIsAllRed) {
  const auto net = validate_network(crossing(1.0, 4.0));
  auto st = make_initial_state(net, 1);
  const auto s_in = link_index(net, "s_in");
  for (int i = 0; i < 3; ++i) place_vehicle(st, net, {s_in, link_index(net, "n_out")}, true);
  run_steps(st, net, 4, 1);
  EXPECT_EQ(st.links[s_in].queue.size(), 3u);
  EXPECT_TRUE(st.signals[0].in_changeover() || st.signals[0].active == 1);
  run_steps(st, net, 1, 1);
  EXPECT_EQ(st.signals[0].active, 1u);
  EXPECT_EQ(st.links[s_in].queue.size(), 2u);
  EXPECT_EQ(st.counters.phase_switches, 1u);
}

TEST(Simulator, MinGreenHoldsPhase) {
  auto spec = crossing(1.0, 0.0);
  spec.intersections[0].min_green = 5;
  const auto net = validate_network(spec);
  auto st = make_initial_state(net, 1);
  run_steps(st, net, 3, 1);
  EXPECT_EQ(st.signals[0].active, 0u);
  run_steps(st, net, 3, 1);
  EXPECT_EQ(st.signals[0].active, 1u);
}

TEST(Simulator, FullDownstreamLinkBlocksDischarge) {
  const auto net = validate_network(crossing(1.0, 0.0, 0.0, 2));
  auto st = make_initial_state(net, 1);
  const auto w = link_index(net, "w_in"), e = link_index(net, "e_out");
  place_vehicle(st, net, {e});
  place_vehicle(st, net, {e});
  place_vehicle(st, net, {w, e}, true);
  run_steps(st, net, 1, 0);
  EXPECT_EQ(st.links[w].queue.size(), 1u);
  EXPECT_GE(st.counters.blocked_discharges, 1u);
  run_steps(st, net, 10, 0);  // the blockers leave e_out at t=10
  EXPECT_TRUE(st.links[w].queue.empty());
}

TEST(Simulator, PoissonInjectionRate) {
  const auto net = validate_network(crossing(1.0, 0.0, 3600.0, 1000));
  auto st = make_initial_state(net, 42);
  const std::vector<std::size_t> c{0};
  for (int i = 0; i < 10000; ++i) {
    inject_vehicles(st, net);
    step(st, net, c);
  }
  const double mean = static_cast<double>(st.counters.generated) / 10000.0;
  EXPECT_NEAR(mean, 1.0, 3.0 * std::sqrt(1.0 / 10000.0));
}

TEST(Simulator, ZeroRateInjectsNothing) {
  const auto net = validate_network(crossing());
  auto st = make_initial_state(net, 1);
  for (int i = 0; i < 100; ++i) inject_vehicles(st, net);
  EXPECT_EQ(st.counters.generated, 0u);
}

TEST(Simulator, RampRatesMatchProfile) {
  GridOptions g;
  g.rows = g.cols = 1;
  g.ramp = pm_rush_ramp();
  g.boundary_capacity = 100000;
  const auto net = validate_network(make_grid(g));
  const std::vector<std::pair<double, double>> tiers{{0, 1800}, {1800, 3600}, {3600, 7200}};
  const std::vector<double> expected{236, 354, 528};
  std::vector<double> counts(3, 0.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto st = make_initial_state(net, seed);
    std::vector<std::size_t> c{0};
    for (int k = 0; k < 7200; ++k) {
      const auto before = st.counters.generated;
      inject_vehicles(st, net);
      const double t = st.clock;
      for (std::size_t i = 0; i < 3; ++i) {
        if (t >= tiers[i].first && t < tiers[i].second) counts[i] += static_cast<double>(st.counters.generated - before);
      }
      c[0] = (k / 30) % 2;
      step(st, net, c);
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const double hours = (tiers[i].second - tiers[i].first) / 3600.0;
    const double per_source = counts[i] / 5.0 / 4.0 / hours;
    EXPECT_NEAR(per_source, expected[i], 0.05 * expected[i]) << i;
  }
}

TEST(Simulator, ConservationCapacityAndDeterminism) {
  GridOptions g;
  g.ramp = {{0, 7200, 2500.0}};
  g.link_length = 40;
  const auto net = validate_network(make_grid(g));
  auto run = [&](std::uint64_t seed) {
    auto st = make_initial_state(net, seed);
    std::vector<std::size_t> c(net.intersections().size(), 0);
    for (int k = 0; k < 1500; ++k) {
      for (auto& p : c) p = (k / 25) % 2;
      inject_vehicles(st, net);
      step(st, net, c);
      EXPECT_EQ(st.counters.generated, st.buffered() + st.on_links() + st.counters.exited);
      for (std::size_t l = 0; l < st.links.size(); ++l) EXPECT_LE(st.links[l].occupancy(), net.link(l).capacity);
    }
    return st;
  };
  const auto a = run(9);
  const auto b = run(9);
  ASSERT_EQ(a.exited.size(), b.exited.size());
  for (std::size_t i = 0; i < a.exited.size(); ++i) {
    EXPECT_EQ(a.exited[i].id, b.exited[i].id);
    EXPECT_EQ(a.exited[i].exit, b.exited[i].exit);
  }
  EXPECT_GT(a.counters.blocked_discharges, 0u);
  EXPECT_GT(a.buffered(), 0u);
}

TEST(Simulator, BadControlIsAnInvariantViolation) {
  const auto net = validate_network(crossing());
  auto st = make_initial_state(net, 1);
  const std::vector<std::size_t> c{7};
  EXPECT_THROW(step(st, net, c), InvariantViolation);
}

TEST(Simulator, MeasureReportsPhaseQueues) {
  const auto net = validate_network(crossing());
  auto st = make_initial_state(net, 1);
  const auto w = link_index(net, "w_in"), s_in = link_index(net, "s_in");
  for (int i = 0; i < 3; ++i) place_vehicle(st, net, {w, link_index(net, "e_out")}, true);
  for (int i = 0; i < 4; ++i) place_vehicle(st, net, {s_in, link_index(net, "n_out")}, true);
  const auto m = measure(st, net);
  EXPECT_EQ(m.phase_queues[0], (std::vector<int>{3, 4}));
  EXPECT_EQ(m.total_queue, 7);
}
