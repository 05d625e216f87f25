#pragma once

/*
 * Experiment runner behind the cli. Parses flat `key = value` configs,
 * executes simulate / sweep / train / report workflows, and writes the
 * CSV/JSON artifacts (metrics.csv per run, summary.json, report.csv,
 * model checkpoints).
 */

#include <cstdint>
#include <string>
#include <vector>

#include "gantrust/errors.hpp"
#include "gantrust/sim.hpp"

namespace gantrust {

struct ExperimentConfig {
  SimConfig sim;                 // per-run seed/malicious_pct overridden by workflows
  std::string out_dir = "out";
  std::vector<uint64_t> seeds = {1};            // never empty
  std::vector<double> sweep_pcts = {10, 20, 30, 40, 50};
  bool baseline = false;  // run with trust management disabled
  int jobs = 1;           // concurrent worlds during sweep
};

// one key = value assignment; throws ValidationError naming the key for
// unknown keys and unparseable or out-of-range values
void apply_setting(ExperimentConfig& cfg, const std::string& key,
                   const std::string& value);

// flat config text: one `key = value` per line, blank lines and `#` comments
// ignored. Structural problems throw ParseError with the 1-based line;
// value problems rethrow the apply_setting error with the line prepended.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);  // IoError if unreadable

// final semantic check (seed list nonempty, percentages within [0, 100],
// jobs >= 1, plus validate() of the embedded simulation config)
void validate(const ExperimentConfig& cfg);

// every settable key with its effective value, in fixed order; the config
// echo embedded in summary.json and a parse round-trip aid
std::vector<std::pair<std::string, std::string>> config_echo(
    const ExperimentConfig& cfg);

inline constexpr const char* kMetricsHeader =
    "round,heads,attacks_drop,attacks_delay,det_tp,det_total_malicious,"
    "det_fp,det_total_benign,delivered,alive_benign,energy_total";

void write_metrics_csv(const std::string& path,
                       const std::vector<RoundMetrics>& rows);
std::vector<RoundMetrics> read_metrics_csv(const std::string& path);

// per-decision rows, written as traces.csv when trace_decisions is on
void write_traces_csv(const std::string& path,
                      const std::vector<DecisionTrace>& rows);

// per malicious percentage: mean/std over seeds (population std)
struct ReportRow {
  double malicious_pct = 0.0;
  double detection_rate_mean = 0.0, detection_rate_std = 0.0;
  double false_positive_rate_mean = 0.0, false_positive_rate_std = 0.0;
  double attacks_drop_mean = 0.0, attacks_drop_std = 0.0;
  double attacks_delay_mean = 0.0, attacks_delay_std = 0.0;
  double lifetime_mean = 0.0, lifetime_std = 0.0;
  double throughput_mean = 0.0, throughput_std = 0.0;
};

std::vector<ReportRow> aggregate_report(
    const std::vector<std::pair<double, SummaryStats>>& runs);
void write_report_csv(const std::string& path,
                      const std::vector<ReportRow>& rows);

// sweep artifact layout: <out>/p<pct>_s<seed>/
std::string run_dir_name(double pct, uint64_t seed);

// one simulation with per-round error context ("round N: ...")
RunResult execute_run(const SimConfig& cfg);

// workflows; all throw on failure (IoError/ValidationError/...), so the cli
// exits 0 exactly when every requested run completed
void run_simulate(const ExperimentConfig& cfg);  // seeds[0]; metrics.csv + summary.json
void run_sweep(const ExperimentConfig& cfg);     // every (pct, seed); report.csv
void run_train(const ExperimentConfig& cfg);     // warm-up only; model checkpoints
void run_report(const ExperimentConfig& cfg);    // rebuild report.csv; print N_r

}  // namespace gantrust
