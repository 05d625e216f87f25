/*
 * Experiment cli. Subcommands: simulate (one run -> metrics.csv +
 * summary.json), sweep (malicious-percentage x seed grid -> report.csv),
 * train (warm-up only -> model checkpoints), report (rebuild report.csv
 * from stored metrics and print the expected first-decision round).
 * Flags override config-file values, which override the defaults.
 */

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gantrust/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"clustered sensor-network trust simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<uint64_t> seeds;
  int rounds = 0;
  double malicious_pct = 0.0;
  bool baseline = false;
  bool trace_decisions = false;

  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--seed", seeds, "seed list (repeatable)");
  app.add_option("--rounds", rounds, "total rounds, warm-up included");
  app.add_option("--malicious-pct", malicious_pct, "malicious node percentage");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--baseline", baseline, "disable trust management");
  app.add_flag("--trace-decisions", trace_decisions, "write per-decision traces.csv");

  CLI::App* cmd_simulate = app.add_subcommand("simulate", "run one simulation");
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "run the percentage x seed grid");
  CLI::App* cmd_train = app.add_subcommand("train", "train models on warm-up evidence");
  CLI::App* cmd_report =
      app.add_subcommand("report", "aggregate stored runs, print expected onset");
  for (CLI::App* sub : {cmd_simulate, cmd_sweep, cmd_train, cmd_report})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    gantrust::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = gantrust::parse_config_file(config_path);
    if (app.count("--rounds")) cfg.sim.rounds = rounds;
    if (app.count("--malicious-pct")) cfg.sim.malicious_pct = malicious_pct;
    if (app.count("--out")) cfg.out_dir = out_dir;
    if (app.count("--seed")) cfg.seeds = seeds;
    if (baseline) cfg.baseline = true;
    if (trace_decisions) cfg.sim.trace_decisions = true;

    if (cmd_simulate->parsed()) gantrust::run_simulate(cfg);
    else if (cmd_sweep->parsed()) gantrust::run_sweep(cfg);
    else if (cmd_train->parsed()) gantrust::run_train(cfg);
    else gantrust::run_report(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
