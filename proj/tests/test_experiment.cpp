#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sigsched/error.hpp"
#include "sigsched/experiment.hpp"
#include "sigsched/grid.hpp"
#include "sigsched/scenario.hpp"

using namespace sigsched;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = SIGSCHED_SCENARIO_DIR;

RunReport fake(std::uint64_t seed, double mean) {
  RunReport r;
  r.seed = seed;
  r.delay.mean = mean;
  r.p90_delay = 2 * mean;
  r.delay_cdf.assign(101, mean);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sigsched_test_" + name);
  fs::remove_all(p);
  return p;
}

NetworkSpec small_grid(double scale) {
  GridOptions g;
  g.rows = g.cols = 2;
  g.link_length = 100;
  g.ramp = pm_rush_ramp(scale);
  g.params.tiers = pm_rush_tiers();
  return make_grid(g);
}

}  // namespace

TEST(Stats, SummarizeAndQuantiles) {
  const std::vector<double> xs{1, 2, 3, 4};
  const auto s = summarize(xs);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(1.25));
  EXPECT_DOUBLE_EQ(s.min, 1);
  EXPECT_DOUBLE_EQ(s.max, 4);
  EXPECT_DOUBLE_EQ(quantile_sorted(xs, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(xs, 1.0), 4);
  EXPECT_EQ(summarize({}).n, 0u);
}

TEST(Compare, ImprovementArithmetic) {
  EXPECT_NEAR(relative_improvement(124.27, 95.31), 0.233, 5e-4);
  EXPECT_DOUBLE_EQ(relative_improvement(100, 40), 0.6);
  EXPECT_DOUBLE_EQ(relative_improvement(0, 0), 0.0);

  const std::vector<RunReport> a{fake(1, 124.27)}, b{fake(1, 95.31)};
  const auto c = compare_reports(a, b);
  EXPECT_NEAR(c.improvement, 0.233, 5e-4);
  EXPECT_EQ(c.seeds_b_worse, 0u);
  EXPECT_DOUBLE_EQ(compare_reports(std::vector<RunReport>{fake(1, 100)}, std::vector<RunReport>{fake(1, 40)})
                       .improvement,
                   0.6);
}

TEST(Compare, IdenticalListsGiveZero) {
  const std::vector<RunReport> a{fake(1, 80), fake(2, 120)};
  const auto c = compare_reports(a, a);
  EXPECT_DOUBLE_EQ(c.improvement, 0.0);
  EXPECT_DOUBLE_EQ(c.p90_improvement, 0.0);
  EXPECT_EQ(c.seeds_b_worse, 2u);  // not lower counts as worse
}

TEST(Compare, MismatchedSeedsThrow) {
  const std::vector<RunReport> a{fake(1, 80), fake(2, 120)}, b{fake(1, 80), fake(3, 120)};
  EXPECT_THROW(compare_reports(a, b), Error);
  EXPECT_THROW(compare_reports(a, std::vector<RunReport>{fake(1, 80)}), Error);
}

TEST(Experiment, ZeroDemandHasZeroDelay) {
  for (auto mode : {ControllerMode::baseline, ControllerMode::composite, ControllerMode::fixed_time}) {
    ExperimentConfig cfg;
    cfg.spec = small_grid(0.0);
    cfg.mode = mode;
    cfg.duration = 600;
    const auto r = run_experiment(cfg);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].records.size(), 0u);
    EXPECT_DOUBLE_EQ(r[0].delay.mean, 0.0);
  }
}

TEST(Experiment, TiersPartitionAllVehicles) {
  ExperimentConfig cfg;
  cfg.spec = small_grid(1.0);
  cfg.duration = 7200;
  cfg.warmup = 0.0;
  const auto r = run_experiment(cfg).at(0);
  ASSERT_EQ(r.tiers.size(), 3u);
  std::size_t n = 0;
  double weighted = 0.0;
  for (const auto& t : r.tiers) {
    n += t.vehicles;
    weighted += t.mean_delay * static_cast<double>(t.vehicles);
  }
  EXPECT_EQ(n, r.records.size());
  EXPECT_NEAR(weighted / static_cast<double>(n), r.delay.mean, 1e-9 * r.delay.mean);
  EXPECT_EQ(emit_demand_tier_breakdown(r, {}).size(), 1u);
  EXPECT_EQ(emit_demand_tier_breakdown(r, {}).at(0).vehicles, r.records.size());
}

TEST(Experiment, SummaryMatchesRawCsv) {
  const auto dir = scratch("csv");
  ExperimentConfig cfg;
  cfg.spec = small_grid(1.2);
  cfg.duration = 1800;
  cfg.seeds = {4};
  cfg.out_dir = dir;
  const auto r = run_experiment(cfg).at(0);

  std::ifstream in(dir / "seed_4" / "vehicles.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> delays;
  while (std::getline(in, line)) {
    const auto comma = line.rfind(',');
    delays.push_back(std::stod(line.substr(comma + 1)));
  }
  const auto s = summarize(delays);
  EXPECT_EQ(s.n, r.delay.n);
  EXPECT_EQ(s.mean, r.delay.mean);
  EXPECT_EQ(s.std, r.delay.std);

  const auto back = report_from_json(slurp(dir / "seed_4" / "summary.json"));
  EXPECT_EQ(back.delay.mean, r.delay.mean);
  EXPECT_EQ(back.unfinished, r.unfinished);
  EXPECT_EQ(back.control_hash, r.control_hash);
  EXPECT_EQ(back.tiers.size(), r.tiers.size());
  EXPECT_EQ(back.p90_delay, r.p90_delay);

  const auto loaded = load_reports(dir);
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].seed, 4u);
  fs::remove_all(dir);
}

TEST(Experiment, RerunsAreByteIdentical) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  for (const auto& dir : {a, b}) {
    ExperimentConfig cfg;
    cfg.spec = small_grid(1.2);
    cfg.duration = 1200;
    cfg.seeds = {2, 3};
    cfg.message_loss = 0.1;
    cfg.out_dir = dir;
    run_experiment(cfg);
  }
  for (const char* seed : {"seed_2", "seed_3"}) {
    for (const char* f : {"vehicles.csv", "queues.csv", "weights.csv", "messages.csv", "summary.json"}) {
      const auto x = slurp(a / seed / f);
      EXPECT_FALSE(x.empty()) << f;
      EXPECT_EQ(x, slurp(b / seed / f)) << seed << "/" << f;
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Experiment, ModeNestingWithoutTraffic) {
  std::vector<std::uint16_t> reference;
  for (auto mode : {ControllerMode::baseline, ControllerMode::local_queue, ControllerMode::composite}) {
    const auto net = validate_network(small_grid(0.0));
    const auto r = run_once(net, mode, 5, 900, 0, {}, true);
    if (reference.empty()) reference = r.control_trace;
    EXPECT_EQ(r.control_trace, reference) << to_string(mode);
  }
}

TEST(Experiment, MissingScenarioIsAnError) {
  ExperimentConfig cfg;
  cfg.scenario = "/nonexistent/scenario.json";
  EXPECT_THROW(run_experiment(cfg), Error);
  cfg.scenario.clear();
  cfg.spec = small_grid(1.0);
  cfg.seeds.clear();
  EXPECT_THROW(run_experiment(cfg), ValidationError);
}

TEST(Experiment, PinnedReferenceBaseline) {
  ExperimentConfig cfg;
  cfg.scenario = kScenarios / "grid4x4.json";
  cfg.mode = ControllerMode::baseline;
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.duration = 7200;
  const auto r = run_experiment(cfg);
  const std::vector<double> mean{159.70126811594204, 233.62263485721002, 123.07858593096859, 131.78852291202506,
                                 107.90119363395226};
  const std::vector<std::size_t> n{16560, 17018, 16746, 16607, 16588};
  ASSERT_EQ(r.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(r[i].records.size(), n[i]) << i;
    EXPECT_NEAR(r[i].delay.mean, mean[i], 1e-9 * mean[i]) << i;
    EXPECT_EQ(r[i].unfinished, 0u);
  }
}
