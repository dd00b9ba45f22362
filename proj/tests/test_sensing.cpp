#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sigsched/network.hpp"
#include "sigsched/sensing.hpp"
#include "sigsched/simulator.hpp"

using namespace sigsched;

namespace {

// Two approaches per phase: W and E feed phase 0, N and S feed phase 1.
ValidatedNetwork four_way(double sat = 0.5) {
  NetworkSpec s;
  s.boundaries = {"W", "E", "S", "N", "Wo", "Eo", "So", "No"};
  auto link = [&](const std::string& id, const std::string& from, const std::string& to) {
    return LinkSpec{id, from, to, 100.0, 10.0, sat, 50};
  };
  s.links = {link("w_in", "W", "X"), link("e_in", "E", "X"), link("s_in", "S", "X"), link("n_in", "N", "X"),
             link("e_out", "X", "Eo"), link("w_out", "X", "Wo"), link("n_out", "X", "No"), link("s_out", "X", "So")};
  IntersectionSpec x;
  x.id = "X";
  x.phases = {{0, {{"w_in", "e_out"}, {"w_in", "n_out"}, {"e_in", "w_out"}}, EdgeClass::h},
              {1, {{"s_in", "n_out"}, {"n_in", "s_out"}}, EdgeClass::v}};
  s.intersections = {x};
  return validate_network(s);
}

std::size_t L(const ValidatedNetwork& net, const std::string& id) { return *net.find_link(id); }

// Trajectory of an EMA started at `from` and driven by a constant `to`.
double ema_closed_form(double from, double to, double alpha, int k) {
  return to + (from - to) * std::pow(1.0 - alpha, k);
}

}  // namespace

TEST(ClusterArrivals, NoVehiclesNoClusters) {
  EXPECT_TRUE(cluster_arrivals({}, 0, 0.0, 60.0, 3.0).clusters.empty());
}

TEST(ClusterArrivals, QueueOfFourAtHalfSaturation) {
  const auto net = four_way(0.5);
  auto st = make_initial_state(net, 1);
  for (int i = 0; i < 4; ++i) place_vehicle(st, net, {L(net, "w_in"), L(net, "e_out")}, true);
  st.clock = 17.0;
  const auto snap = snapshot(st, net, 0);
  const auto seq = build_cluster_sequence(snap, net.intersection(0), 0, 60.0, 3.0);
  ASSERT_EQ(seq.clusters.size(), 1u);
  EXPECT_EQ(seq.clusters[0], (Cluster{4.0, 17.0, 25.0}));
  EXPECT_TRUE(build_cluster_sequence(snap, net.intersection(0), 1, 60.0, 3.0).clusters.empty());
}

TEST(ClusterArrivals, GapThresholdDecidesMerging) {
  const std::vector<SensedArrival> a{{10.0, 0, 1.0}, {11.0, 0, 1.0}};
  const auto merged = cluster_arrivals(a, 0, 0.0, 60.0, 2.0);
  ASSERT_EQ(merged.clusters.size(), 1u);
  EXPECT_DOUBLE_EQ(merged.clusters[0].count, 2.0);
  EXPECT_EQ(cluster_arrivals(a, 0, 0.0, 60.0, 0.5).clusters.size(), 2u);
}

TEST(ClusterArrivals, ParallelApproachesTakeTheLongerDischarge) {
  // 3 vehicles on one approach and 1 on another, both at 0.5 veh/s
  const std::vector<SensedArrival> a{{0, 1, 0.5}, {0, 1, 0.5}, {0, 1, 0.5}, {0, 2, 0.5}};
  const auto seq = cluster_arrivals(a, 0, 0.0, 60.0, 3.0);
  ASSERT_EQ(seq.clusters.size(), 1u);
  EXPECT_EQ(seq.clusters[0], (Cluster{4.0, 0.0, 6.0}));
}

TEST(ClusterArrivals, HorizonCutsOffLateArrivals) {
  const std::vector<SensedArrival> a{{5, 0, 1.0}, {59.5, 0, 1.0}, {60.0, 0, 1.0}, {90, 0, 1.0}};
  EXPECT_DOUBLE_EQ(cluster_arrivals(a, 0, 0.0, 60.0, 3.0).vehicle_count(), 2.0);
}

TEST(ClusterArrivals, CountConservationAndPermutationInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> t(0.0, 80.0);
  std::uniform_int_distribution<std::size_t> link(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SensedArrival> a(1 + trial % 30);
    for (auto& x : a) x = {t(rng), link(rng), 0.5};
    const auto ref = cluster_arrivals(a, 1, 0.0, 60.0, 2.5);
    const auto within = std::count_if(a.begin(), a.end(), [](const SensedArrival& x) { return x.arrival < 60.0; });
    EXPECT_DOUBLE_EQ(ref.vehicle_count(), static_cast<double>(within));
    for (std::size_t i = 1; i < ref.clusters.size(); ++i) {
      EXPECT_LT(ref.clusters[i - 1].arr, ref.clusters[i].arr);
      EXPECT_GT(ref.clusters[i].arr - ref.clusters[i - 1].arr, 0.0);
    }
    std::shuffle(a.begin(), a.end(), rng);
    const auto shuffled = cluster_arrivals(a, 1, 0.0, 60.0, 2.5);
    EXPECT_EQ(shuffled.clusters, ref.clusters);
  }
}

TEST(ClusterSequence, MovingVehiclesArriveAtTheirEta) {
  const auto net = four_way(1.0);
  auto st = make_initial_state(net, 1);
  place_vehicle(st, net, {L(net, "s_in"), L(net, "n_out")});
  const std::vector<std::size_t> c{0};
  step(st, net, c);
  step(st, net, c);
  const auto seq = build_cluster_sequence(snapshot(st, net, 0), net.intersection(0), 1, 60.0, 3.0);
  ASSERT_EQ(seq.clusters.size(), 1u);
  EXPECT_DOUBLE_EQ(seq.clusters[0].arr, 10.0);
  EXPECT_DOUBLE_EQ(seq.clusters[0].dep, 11.0);
}

TEST(EstimateQueue, EmptyAndSumOverInLinks) {
  const auto net = four_way();
  auto st = make_initial_state(net, 1);
  EXPECT_EQ(estimate_queue(snapshot(st, net, 0), net.intersection(0), 0), 0);
  for (int i = 0; i < 3; ++i) place_vehicle(st, net, {L(net, "w_in"), L(net, "e_out")}, true);
  for (int i = 0; i < 4; ++i) place_vehicle(st, net, {L(net, "e_in"), L(net, "w_out")}, true);
  place_vehicle(st, net, {L(net, "s_in"), L(net, "n_out")}, true);
  const auto snap = snapshot(st, net, 0);
  EXPECT_EQ(estimate_queue(snap, net.intersection(0), 0), 7);
  EXPECT_EQ(estimate_queue(snap, net.intersection(0), 1), 1);
}

TEST(EstimateQueue, NoiseIsCentred) {
  const auto net = four_way();
  auto st = make_initial_state(net, 1);
  for (int i = 0; i < 20; ++i) place_vehicle(st, net, {L(net, "w_in"), L(net, "e_out")}, true);
  const auto snap = snapshot(st, net, 0);
  std::mt19937_64 rng(3);
  double sum = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) sum += estimate_queue(snap, net.intersection(0), 0, 1.0, &rng);
  // rounding N(0, 1) keeps the mean at zero; its std is about 1.04
  EXPECT_NEAR(sum / n, 20.0, 3.0 * 1.05 / std::sqrt(n));
}

TEST(TurnEstimate, ConstantSplitIsAFixedPoint) {
  const auto net = four_way();
  TurnEstimate est(net.intersection(0), 0.1);
  const std::vector<double> counts{5, 5, 3, 4, 2};
  for (int i = 0; i < 200; ++i) est = update_turning_proportions(est, counts);
  EXPECT_NEAR(est.zeta(0), 0.5, 1e-3);
  EXPECT_NEAR(est.zeta(1), 0.5, 1e-3);
  EXPECT_DOUBLE_EQ(est.zeta(2), 1.0);
}

TEST(TurnEstimate, AllStraight) {
  const auto net = four_way();
  TurnEstimate est(net.intersection(0), 0.1);
  EXPECT_DOUBLE_EQ(est.zeta(0), 0.5);  // uninformed prior
  for (int i = 0; i < 100; ++i) est.update(std::vector<double>{7, 0, 1, 1, 1});
  EXPECT_NEAR(est.zeta(0), 1.0, 1e-9);
  EXPECT_NEAR(est.zeta(1), 0.0, 1e-9);
}

TEST(TurnEstimate, SplitReversalFollowsClosedForm) {
  for (double alpha : {0.1, 0.05}) {
    const auto net = four_way();
    TurnEstimate est(net.intersection(0), alpha);
    est.update(std::vector<double>{8, 2, 1, 1, 1});
    ASSERT_DOUBLE_EQ(est.zeta(0), 0.8);
    int crossing = -1;
    for (int k = 1; k <= 40; ++k) {
      est.update(std::vector<double>{2, 8, 1, 1, 1});
      EXPECT_NEAR(est.zeta(0), ema_closed_form(0.8, 0.2, alpha, k), 1e-12);
      if (crossing < 0 && est.zeta(0) < 0.5) crossing = k;
    }
    const int expected = static_cast<int>(std::ceil(std::log(0.5) / std::log(1.0 - alpha)));
    EXPECT_EQ(crossing, expected);
    if (alpha == 0.1) EXPECT_EQ(crossing, 7);
    if (alpha == 0.05) EXPECT_EQ(crossing, 14);
  }
}

TEST(TurnEstimate, EmptyWindowKeepsProportions) {
  const auto net = four_way();
  TurnEstimate est(net.intersection(0), 0.1);
  est.update(std::vector<double>{9, 1, 1, 1, 1});
  est.update(std::vector<double>{0, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(est.zeta(0), 0.9);
}

TEST(TurnEstimate, EtaSumsToOnePerPhase) {
  const auto net = four_way();
  TurnEstimate est(net.intersection(0), 0.1);
  est.update(std::vector<double>{6, 2, 4, 3, 3});
  EXPECT_NEAR(est.eta(0) + est.eta(1) + est.eta(2), 1.0, 1e-12);
  EXPECT_NEAR(est.eta(3) + est.eta(4), 1.0, 1e-12);
  EXPECT_NEAR(est.eta(0), 6.0 / 12.0, 1e-12);
}
