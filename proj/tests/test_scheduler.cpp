#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "sigsched/error.hpp"
#include "sigsched/scheduler.hpp"

using namespace sigsched;

namespace {

SchedulerInput two_cluster_instance() {
  SchedulerInput in;
  in.sequences = {{0, {{5, 0, 5}}}, {1, {{1, 0, 1}}}};
  in.weights = {1.0, 1.0};
  in.changeover_time = 3;
  in.current_phase = 0;
  return in;
}

// Random instance with integer times and dyadic weights so that every cost
// is exactly representable and equality can be checked with ==.
SchedulerInput random_instance(std::mt19937_64& rng, bool dyadic) {
  std::uniform_int_distribution<int> phases_d(2, 3);
  const std::size_t P = static_cast<std::size_t>(phases_d(rng));
  std::uniform_int_distribution<int> total_d(1, 10);
  const int total = total_d(rng);
  std::uniform_int_distribution<std::size_t> which(0, P - 1);
  std::vector<int> per(P, 0);
  for (int k = 0; k < total; ++k) ++per[which(rng)];

  SchedulerInput in;
  std::uniform_int_distribution<int> gap(0, 6), len(1, 8), cnt(1, 9), co(0, 4), wi(1, 64);
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  for (std::size_t p = 0; p < P; ++p) {
    ClusterSequence seq{p, {}};
    double t = 0.0;
    for (int k = 0; k < per[p]; ++k) {
      t += dyadic ? gap(rng) : ur(rng) * 6.0;
      const double d = dyadic ? len(rng) : 0.5 + ur(rng) * 7.0;
      seq.clusters.push_back({static_cast<double>(cnt(rng)), t, t + d});
      t += d;
    }
    in.sequences.push_back(seq);
    in.weights.push_back(dyadic ? wi(rng) / 64.0 : 0.01 + ur(rng));
  }
  in.changeover_time = co(rng);
  in.current_phase = which(rng);
  return in;
}

bool order_preserved(const PhaseSchedule& s, const SchedulerInput& in) {
  std::vector<std::size_t> next(in.sequences.size(), 0);
  for (const auto& e : s.entries) {
    if (e.index != next[e.phase]++) return false;
  }
  for (std::size_t p = 0; p < in.sequences.size(); ++p) {
    if (next[p] != in.sequences[p].clusters.size()) return false;
  }
  return true;
}

}  // namespace

TEST(Scheduler, EqualWeightsServeLongClusterFirst) {
  const auto in = two_cluster_instance();
  const auto s = schedule(in);
  ASSERT_EQ(s.entries.size(), 2u);
  EXPECT_EQ(s.entries[0].phase, 0u);
  EXPECT_DOUBLE_EQ(s.entries[0].ast, 0.0);
  EXPECT_DOUBLE_EQ(s.entries[1].ast, 8.0);
  EXPECT_DOUBLE_EQ(s.total_weighted_delay, 8.0);
  EXPECT_DOUBLE_EQ(brute_force_schedule(in).total_weighted_delay, 8.0);
}

TEST(Scheduler, SkewedWeightsServeShortClusterFirst) {
  auto in = two_cluster_instance();
  in.weights = {0.1, 0.9};
  const auto s = schedule(in);
  EXPECT_EQ(s.entries.front().phase, 1u);
  // phase 1 waits 3 s changeover, phase 0 resumes at 1 + 3 = 4
  EXPECT_NEAR(s.total_weighted_delay, 0.9 * 1 * 3 + 0.1 * 5 * 7, 1e-12);
  EXPECT_LT(s.total_weighted_delay, 7.2);
}

TEST(Scheduler, SingleClusterOnCurrentPhaseHasNoDelay) {
  SchedulerInput in;
  in.sequences = {{0, {{3, 2, 5}}}, {1, {}}};
  in.weights = {1, 1};
  in.changeover_time = 4;
  const auto s = schedule(in);
  ASSERT_EQ(s.entries.size(), 1u);
  EXPECT_DOUBLE_EQ(s.entries[0].ast, 2.0);
  EXPECT_DOUBLE_EQ(s.total_weighted_delay, 0.0);
}

TEST(Scheduler, EmptyInputHoldsCurrentPhase) {
  SchedulerInput in;
  in.sequences = {{0, {}}, {1, {}}};
  in.weights = {1, 1};
  in.current_phase = 1;
  const auto s = schedule(in);
  EXPECT_TRUE(s.empty());
  EXPECT_EQ(s.first_phase(), 1u);
  EXPECT_EQ(s.total_weighted_delay, 0.0);
}

TEST(Scheduler, LongClusterIsSplitAtMaxGreen) {
  SchedulerInput in;
  in.sequences = {{0, {{10, 0, 20}}}, {1, {{2, 0, 2}}}};
  in.weights = {1, 1};
  in.changeover_time = 2;
  in.max_green = 12;
  const auto s = schedule(in);
  EXPECT_GE(s.splits, 1u);
  double total = 0.0;
  for (const auto& e : s.entries) total += e.cluster.count;
  EXPECT_NEAR(total, 12.0, 1e-12);
  // phase 1 is served between the two parts of phase 0
  std::vector<std::size_t> phases;
  for (const auto& e : s.entries) phases.push_back(e.phase);
  ASSERT_GE(phases.size(), 3u);
  EXPECT_EQ(phases.front(), 0u);
  EXPECT_EQ(phases.back(), 0u);
  EXPECT_NE(std::find(phases.begin(), phases.end(), 1u), phases.end());
  for (const auto& g : s.green) EXPECT_LE(g.end - g.start, 12.0 + 1e-9);
  EXPECT_EQ(s.entries.front().cluster, (Cluster{6, 0, 12}));
}

TEST(Scheduler, SplitRespectsMaxGreenOnRandomInstances) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    auto in = random_instance(rng, true);
    in.max_green = 6 + static_cast<double>(i % 10);
    const auto s = schedule(in);
    double in_total = 0.0;
    for (const auto& q : in.sequences) in_total += q.vehicle_count();
    double out_total = 0.0;
    for (const auto& e : s.entries) out_total += e.cluster.count;
    EXPECT_NEAR(in_total, out_total, 1e-9);
    for (std::size_t k = 0; k < s.green.size(); ++k) {
      // a run may exceed max green only if it is the last one
      if (k + 1 < s.green.size()) EXPECT_LE(s.green[k].end - s.green[k].start, in.max_green + 1e-9);
    }
  }
}

TEST(Scheduler, MatchesBruteForceExactly) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto in = random_instance(rng, true);
    const auto a = schedule(in);
    const auto b = brute_force_schedule(in);
    ASSERT_EQ(a.total_weighted_delay, b.total_weighted_delay) << "instance " << i;
    ASSERT_TRUE(order_preserved(a, in));
  }
}

TEST(Scheduler, MatchesBruteForceOnContinuousData) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 500; ++i) {
    const auto in = random_instance(rng, false);
    const double a = schedule(in).total_weighted_delay;
    const double b = brute_force_schedule(in).total_weighted_delay;
    ASSERT_NEAR(a, b, 1e-9 * std::max(1.0, b)) << "instance " << i;
  }
}

TEST(Scheduler, ChangeoverIsInsertedBetweenPhases) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto in = random_instance(rng, true);
    const auto s = schedule(in);
    for (std::size_t k = 1; k < s.entries.size(); ++k) {
      const auto& prev = s.entries[k - 1];
      const auto& cur = s.entries[k];
      EXPECT_GE(cur.ast, cur.cluster.arr);
      if (prev.phase != cur.phase) {
        EXPECT_GE(cur.ast, prev.finish + in.changeover_time);
      } else {
        EXPECT_GE(cur.ast, prev.finish);
      }
    }
  }
}

TEST(Scheduler, UniformWeightScalingKeepsSchedule) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    auto in = random_instance(rng, true);
    std::fill(in.weights.begin(), in.weights.end(), 1.0);
    const auto base = schedule(in);
    auto scaled = in;
    std::fill(scaled.weights.begin(), scaled.weights.end(), 1.0 / static_cast<double>(in.weights.size()));
    const auto s = schedule(scaled);
    ASSERT_EQ(base.entries.size(), s.entries.size());
    for (std::size_t k = 0; k < s.entries.size(); ++k) {
      EXPECT_EQ(base.entries[k].phase, s.entries[k].phase);
      EXPECT_EQ(base.entries[k].ast, s.entries[k].ast);
    }
  }
}

TEST(Scheduler, MinGreenDelaysSwitch) {
  SchedulerInput in;
  in.sequences = {{0, {{1, 0, 1}}}, {1, {{1, 0, 1}}}};
  in.weights = {1, 1};
  in.changeover_time = 2;
  in.min_green = 10;
  in.current_phase = 0;
  const auto s = schedule(in);
  ASSERT_EQ(s.entries.size(), 2u);
  EXPECT_DOUBLE_EQ(s.entries[1].ast, 12.0);
}

TEST(Scheduler, OnePhaseIsIdentityOrder) {
  SchedulerInput in;
  in.sequences = {{0, {{1, 0, 1}, {2, 3, 5}, {1, 9, 10}}}};
  in.weights = {1};
  const auto s = brute_force_schedule(in);
  ASSERT_EQ(s.entries.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(s.entries[k].index, k);
}

TEST(Scheduler, RejectsBadInput) {
  auto in = two_cluster_instance();
  in.weights = {1.0, 0.0};
  EXPECT_THROW(schedule(in), SchedulerError);
  in = two_cluster_instance();
  in.sequences[0].clusters[0].arr = -1;
  EXPECT_THROW(schedule(in), SchedulerError);
  in = two_cluster_instance();
  for (int k = 0; k < 10; ++k) in.sequences[1].clusters.push_back({1, 2.0 + k, 3.0 + k});
  EXPECT_THROW(brute_force_schedule(in), SchedulerError);
}

TEST(Scheduler, CumulativeWeightedDelay) {
  PhaseSchedule s;
  EXPECT_EQ(cumulative_weighted_delay(s, std::vector<double>{1.0}), 0.0);
  s.entries.push_back({0, 0, {4, 0, 4}, 5, 9});
  EXPECT_DOUBLE_EQ(cumulative_weighted_delay(s, std::vector<double>{0.5}), 10.0);
  const auto in = two_cluster_instance();
  const auto b = brute_force_schedule(in);
  EXPECT_DOUBLE_EQ(cumulative_weighted_delay(b, in.weights), b.total_weighted_delay);
}
