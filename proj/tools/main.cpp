// sigsched: run, compare and validate signal-control experiments.
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sigsched/error.hpp"
#include "sigsched/experiment.hpp"
#include "sigsched/grid.hpp"
#include "sigsched/scenario.hpp"

using namespace sigsched;

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const auto v = std::stoull(item, &used);
    if (used != item.size()) throw ValidationError("bad seed '" + item + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw ValidationError("no seeds given");
  return seeds;
}

void print_run(const RunReport& r) {
  std::cout << "seed " << r.seed << ": vehicles " << r.delay.n << " (unfinished " << r.unfinished << "), mean delay " << std::fixed
            << std::setprecision(2) << r.delay.mean << " s (std " << r.delay.std << "), p90 " << r.p90_delay
            << " s";
  for (const auto& t : r.tiers) std::cout << ", " << t.label << " " << t.mean_delay;
  std::cout << '\n' << std::defaultfloat;
}

void print_comparison(const ComparisonSummary& c) {
  std::cout << std::fixed << std::setprecision(2);
  std::cout << "mean delay  a " << c.mean_a << " s, b " << c.mean_b << " s, improvement "
            << 100.0 * c.improvement << "%\n";
  std::cout << "p90 delay   a " << c.p90_a << " s, b " << c.p90_b << " s, improvement "
            << 100.0 * c.p90_improvement << "%\n";
  for (const auto& s : c.seeds) {
    std::cout << "  seed " << s.seed << ": " << s.mean_a << " -> " << s.mean_b << " (" << 100.0 * s.improvement
              << "%)\n";
  }
  for (const auto& t : c.tiers) {
    std::cout << "  tier " << t.label << ": " << t.mean_a << " -> " << t.mean_b << " (" << 100.0 * t.improvement
              << "%)\n";
  }
  std::cout << std::defaultfloat;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schedule-driven signal control with mean-field phase weighting"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string mode = "composite", seeds = "1", scenario, out;
  double warmup = -1.0, loss = -1.0;
  auto* run = app.add_subcommand("run", "Run one controller mode over a list of seeds");
  run->add_option("--scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", mode, "fixed_time | baseline | local_queue | composite");
  run->add_option("--seeds", seeds, "Comma separated seeds");
  run->add_option("--duration", cfg.duration, "Simulated seconds")->check(CLI::PositiveNumber);
  run->add_option("--warmup", warmup, "Seconds excluded from statistics (default: scenario value)");
  run->add_option("--message-loss", loss, "Override message loss probability")->check(CLI::Range(0.0, 1.0));
  run->add_option("--out", out, "Output directory");

  std::string dir_a, dir_b;
  bool as_json = false;
  auto* cmp = app.add_subcommand("compare", "Compare two result directories (a is the reference)");
  cmp->add_option("--a", dir_a)->required();
  cmp->add_option("--b", dir_b)->required();
  cmp->add_flag("--json", as_json, "Print the comparison as JSON");

  auto* val = app.add_subcommand("validate", "Check a scenario file");
  val->add_option("--scenario", scenario)->required()->check(CLI::ExistingFile);

  GridOptions grid;
  std::string grid_out, three_phase;
  double ramp_scale = 1.0;
  auto* gen = app.add_subcommand("grid", "Write a grid scenario with the late-afternoon demand ramp");
  gen->add_option("--rows", grid.rows);
  gen->add_option("--cols", grid.cols);
  gen->add_option("--link-length", grid.link_length);
  gen->add_option("--max-green", grid.max_green);
  gen->add_option("--scale", ramp_scale, "Multiplier on 236/354/528 veh/h");
  gen->add_option("--eastbound", grid.eastbound);
  gen->add_option("--westbound", grid.westbound);
  gen->add_option("--northbound", grid.northbound);
  gen->add_option("--southbound", grid.southbound);
  gen->add_option("--three-phase", three_phase, "Semicolon separated r,c pairs");
  gen->add_flag("!--no-turns", grid.turns, "Through movements only");
  gen->add_option("--out", grid_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      cfg.scenario = scenario;
      cfg.mode = controller_mode_from_string(mode);
      cfg.seeds = parse_seeds(seeds);
      if (warmup >= 0.0) cfg.warmup = warmup;
      if (loss >= 0.0) cfg.message_loss = loss;
      cfg.out_dir = out;
      for (const auto& r : run_experiment(cfg)) print_run(r);
    } else if (*cmp) {
      const auto a = load_reports(dir_a);
      const auto b = load_reports(dir_b);
      const auto c = compare_reports(a, b);
      if (as_json) {
        std::cout << comparison_to_json(c) << '\n';
      } else {
        print_comparison(c);
      }
    } else if (*val) {
      const auto net = validate_network(load_scenario(scenario));
      std::cout << scenario << ": ok, " << net.intersections().size() << " intersections, " << net.links().size()
                << " links, " << net.sources().size() << " sources, " << net.queue_count() << " queues\n";
    } else if (*gen) {
      grid.ramp = pm_rush_ramp(ramp_scale);
      grid.params.tiers = pm_rush_tiers();
      std::stringstream ss(three_phase);
      std::string pair;
      while (std::getline(ss, pair, ';')) {
        int r = 0, c = 0;
        char comma = 0;
        std::stringstream ps(pair);
        if (!(ps >> r >> comma >> c) || comma != ',') throw ValidationError("bad --three-phase entry '" + pair + "'");
        grid.three_phase.insert({r, c});
      }
      const auto spec = make_grid(grid);
      validate_network(spec);
      save_scenario(spec, grid_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
