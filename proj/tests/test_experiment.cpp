#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gantrust/codec.hpp"
#include "gantrust/experiment.hpp"
#include "json.hpp"

using namespace gantrust;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// unique scratch directory, removed at scope exit
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("gantrust_exp_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

// fast plumbing-test world: trust management off
ExperimentConfig quick_experiment() {
  ExperimentConfig cfg;
  cfg.sim.nodes = 30;
  cfg.sim.rounds = 40;
  cfg.sim.warmup_rounds = 0;
  cfg.sim.trust_enabled = false;
  cfg.seeds = {7};
  return cfg;
}

}  // namespace

TEST_CASE("empty config text keeps every default") {
  const ExperimentConfig cfg = parse_config_text("");
  CHECK(cfg.sim.p_cluster == 0.07);
  CHECK(cfg.sim.p_attack == 0.1);
  CHECK(cfg.sim.p_bad == 0.1);
  CHECK(cfg.sim.initial_energy == 1.3);
  CHECK(cfg.sim.l_w1 == 10);
  CHECK(cfg.sim.l_w2 == 4);
  CHECK(cfg.sim.alpha == 0.5);
  CHECK(cfg.sim.beta == 0.5);
  CHECK(cfg.sim.nodes == 100);
  CHECK(cfg.sim.field == 100.0);
  CHECK(cfg.seeds == std::vector<uint64_t>{1});
  CHECK(cfg.sweep_pcts == std::vector<double>{10, 20, 30, 40, 50});
  CHECK_FALSE(cfg.baseline);
}

TEST_CASE("comments, blank lines, and CRLF are tolerated") {
  const ExperimentConfig cfg = parse_config_text(
      "# header comment\n"
      "\n"
      "rounds = 20\r\n"
      "nodes = 50   # trailing comment\n");
  CHECK(cfg.sim.rounds == 20);
  CHECK(cfg.sim.nodes == 50);
}

TEST_CASE("later assignments override earlier ones") {
  // same precedence path the cli uses: file first, flags after
  ExperimentConfig cfg = parse_config_text("rounds = 300\n");
  CHECK(cfg.sim.rounds == 300);
  apply_setting(cfg, "rounds", "100");
  CHECK(cfg.sim.rounds == 100);
}

TEST_CASE("structural problems report the line") {
  CHECK_THROWS_WITH_AS(parse_config_text("rounds 300\n"),
                       doctest::Contains("line 1"), ParseError);
  CHECK_THROWS_WITH_AS(parse_config_text("rounds = 1\n= 4\n"),
                       doctest::Contains("line 2"), ParseError);
}

TEST_CASE("unknown keys and bad values are rejected naming the culprit") {
  CHECK_THROWS_WITH_AS(parse_config_text("whatkey = 3\n"),
                       doctest::Contains("unknown key 'whatkey'"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("rounds = nope\n"),
                       doctest::Contains("rounds"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("p_bad = 0.1.2\n"),
                       doctest::Contains("p_bad"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("trust_enabled = maybe\n"),
                       doctest::Contains("trust_enabled"), ValidationError);
}

TEST_CASE("out-of-range values fail validation with the key named") {
  ExperimentConfig cfg;
  apply_setting(cfg, "malicious_pct", "150");  // parses; semantics rejected
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("malicious_pct"),
                       ValidationError);

  ExperimentConfig neg;
  apply_setting(neg, "jobs", "0");
  CHECK_THROWS_WITH_AS(validate(neg), doctest::Contains("jobs"), ValidationError);
}

TEST_CASE("seed and percentage lists parse and validate") {
  ExperimentConfig cfg = parse_config_text("seeds = 3, 5, 8\nsweep_pcts = 0, 12.5, 100\n");
  CHECK(cfg.seeds == std::vector<uint64_t>{3, 5, 8});
  CHECK(cfg.sweep_pcts == std::vector<double>{0.0, 12.5, 100.0});
  CHECK_THROWS_WITH_AS(parse_config_text("seeds = \n"),
                       doctest::Contains("seeds"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("seeds = 1,,2\n"),
                       doctest::Contains("seeds"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("sweep_pcts = 101\n"),
                       doctest::Contains("sweep_pcts"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("seeds = -1\n"),
                       doctest::Contains("seeds"), ValidationError);
}

TEST_CASE("window keys keep the model input sizes in step") {
  ExperimentConfig cfg;
  apply_setting(cfg, "l_w1", "12");
  CHECK(cfg.sim.manager.codec.data_dim == 12);
  CHECK(cfg.sim.manager.redemption.seq_len == 12);
  apply_setting(cfg, "l_w2", "6");
  CHECK(cfg.sim.manager.redemption.window == 6);
  apply_setting(cfg, "rounds", "60");  // keep warmup <= rounds? defaults ok
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("config echo round-trips through the parser") {
  ExperimentConfig cfg;
  apply_setting(cfg, "eps_mp", "0.0013e-12");
  apply_setting(cfg, "malicious_pct", "37.5");
  apply_setting(cfg, "seeds", "4,9");
  apply_setting(cfg, "baseline", "true");
  apply_setting(cfg, "out", "artifacts");
  apply_setting(cfg, "codec_lr", "0.0002");

  ExperimentConfig copy;
  for (const auto& [key, value] : config_echo(cfg)) apply_setting(copy, key, value);
  CHECK(config_echo(copy) == config_echo(cfg));
  CHECK(copy.sim.eps_mp == cfg.sim.eps_mp);
  CHECK(copy.sim.manager.codec.lr == cfg.sim.manager.codec.lr);
  CHECK(copy.seeds == cfg.seeds);
  CHECK(copy.out_dir == "artifacts");
}

TEST_CASE("metrics csv round-trips exactly") {
  TempDir dir("metrics");
  std::vector<RoundMetrics> rows(3);
  rows[0] = {0, 7, 12, 9, 4, 6, 1, 20, 300, 70, 129.93000000000001};
  rows[1] = {1, 6, 15, 11, 5, 8, 0, 22, 295, 70, 128.5};
  rows[2] = {2, 8, 13, 10, 6, 9, 2, 21, 290, 69, 127.0001};
  const std::string path = dir.sub("metrics.csv");
  write_metrics_csv(path, rows);

  const std::string text = slurp(path);
  CHECK(text.substr(0, text.find('\n')) == kMetricsHeader);

  const std::vector<RoundMetrics> back = read_metrics_csv(path);
  REQUIRE(back.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].round == rows[i].round);
    CHECK(back[i].heads == rows[i].heads);
    CHECK(back[i].attacks_drop == rows[i].attacks_drop);
    CHECK(back[i].attacks_delay == rows[i].attacks_delay);
    CHECK(back[i].det_tp == rows[i].det_tp);
    CHECK(back[i].det_total_malicious == rows[i].det_total_malicious);
    CHECK(back[i].det_fp == rows[i].det_fp);
    CHECK(back[i].det_total_benign == rows[i].det_total_benign);
    CHECK(back[i].delivered == rows[i].delivered);
    CHECK(back[i].alive_benign == rows[i].alive_benign);
    CHECK(back[i].energy_total == rows[i].energy_total);  // bit-exact
  }

  const SummaryStats a = summarize_metrics(rows);
  const SummaryStats b = summarize_metrics(back);
  CHECK(a.detection_rate == b.detection_rate);
  CHECK(a.lifetime == b.lifetime);
  CHECK(a.throughput == b.throughput);
}

TEST_CASE("malformed metrics files are rejected with location") {
  TempDir dir("badcsv");
  {
    std::ofstream os(dir.sub("h.csv"));
    os << "round,heads\n";
  }
  CHECK_THROWS_WITH_AS(read_metrics_csv(dir.sub("h.csv")),
                       doctest::Contains("line 1"), ParseError);
  {
    std::ofstream os(dir.sub("f.csv"));
    os << kMetricsHeader << "\n0,1,2\n";
  }
  CHECK_THROWS_WITH_AS(read_metrics_csv(dir.sub("f.csv")),
                       doctest::Contains("line 2"), ParseError);
  CHECK_THROWS_AS(read_metrics_csv(dir.sub("missing.csv")), IoError);
}

TEST_CASE("report rows aggregate means and population deviations") {
  SummaryStats a, b, c;
  a.detection_rate = 0.8;
  a.false_positive_rate = 0.1;
  a.attacks_drop = 100;
  a.lifetime = 200;
  a.throughput = 1000;
  b = a;
  b.detection_rate = 0.9;
  b.attacks_drop = 140;
  c.detection_rate = 0.5;
  c.attacks_drop = 70;
  c.lifetime = 300;
  c.throughput = 500;

  const auto rows = aggregate_report({{30.0, a}, {30.0, b}, {50.0, c}});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].malicious_pct == 30.0);
  CHECK(rows[0].detection_rate_mean == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(rows[0].detection_rate_std == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(rows[0].attacks_drop_mean == doctest::Approx(120.0));
  CHECK(rows[0].attacks_drop_std == doctest::Approx(20.0));
  CHECK(rows[1].malicious_pct == 50.0);
  CHECK(rows[1].detection_rate_std == 0.0);  // single run
  CHECK(rows[1].lifetime_mean == doctest::Approx(300.0));
}

TEST_CASE("run directory names encode percentage and seed") {
  CHECK(run_dir_name(12.5, 7) == "p12.5_s7");
  CHECK(run_dir_name(50, 3) == "p50_s3");
}

TEST_CASE("simulate writes byte-identical artifacts for the same seed") {
  TempDir dir("sim");
  ExperimentConfig cfg = quick_experiment();
  cfg.out_dir = dir.sub("a");
  run_simulate(cfg);
  const std::string first = slurp(dir.sub("a") + "/summary.json");
  run_simulate(cfg);  // same destination: every artifact must come back identical
  CHECK(slurp(dir.sub("a") + "/summary.json") == first);
  cfg.out_dir = dir.sub("b");
  run_simulate(cfg);

  CHECK(slurp(dir.sub("a") + "/metrics.csv") == slurp(dir.sub("b") + "/metrics.csv"));

  const std::vector<RoundMetrics> rows = read_metrics_csv(dir.sub("a") + "/metrics.csv");
  CHECK(static_cast<int>(rows.size()) == cfg.sim.rounds);
}

TEST_CASE("summary json carries exactly the summary fields plus config and seed") {
  TempDir dir("json");
  ExperimentConfig cfg = quick_experiment();
  cfg.out_dir = dir.str();
  run_simulate(cfg);

  const nlohmann::ordered_json j =
      nlohmann::ordered_json::parse(slurp(dir.sub("summary.json")));
  const std::vector<std::string> expected = {
      "detection_rate", "false_positive_rate", "tp", "malicious_decisions",
      "fp", "benign_decisions", "attacks_drop", "attacks_delay", "throughput",
      "lifetime", "lifetime_censored", "rounds", "config", "seed"};
  std::vector<std::string> keys;
  for (const auto& item : j.items()) keys.push_back(item.key());
  CHECK(keys == expected);

  CHECK(j["seed"] == 7);
  CHECK(j["rounds"] == 40);
  CHECK(j["config"]["nodes"] == "30");
  CHECK(j["config"]["trust_enabled"] == "false");
  CHECK(j["config"]["seeds"] == "7");

  // the echoed config reproduces the run when parsed back
  ExperimentConfig echoed;
  for (const auto& item : j["config"].items())
    apply_setting(echoed, item.key(), item.value().get<std::string>());
  CHECK(echoed.sim.nodes == 30);
  CHECK(echoed.sim.rounds == 40);
  CHECK(echoed.seeds == std::vector<uint64_t>{7});
}

TEST_CASE("traces are written when decision tracing is on") {
  TempDir dir("traces");
  ExperimentConfig cfg = quick_experiment();
  cfg.sim.trace_decisions = true;
  cfg.out_dir = dir.str();
  run_simulate(cfg);
  const std::string text = slurp(dir.sub("traces.csv"));
  CHECK(text.substr(0, text.find('\n')) ==
        "round,decider,target,recommendations,loss,cooperation,class,label");
}

TEST_CASE("sweep covers the grid and report reproduces its table") {
  TempDir dir("sweep");
  ExperimentConfig cfg = quick_experiment();
  cfg.seeds = {1, 2};
  cfg.sweep_pcts = {10, 30};
  cfg.jobs = 2;
  cfg.out_dir = dir.str();
  run_sweep(cfg);

  for (const char* name : {"p10_s1", "p10_s2", "p30_s1", "p30_s2"}) {
    CHECK(fs::exists(dir.sub(name) + "/metrics.csv"));
    CHECK(fs::exists(dir.sub(name) + "/summary.json"));
  }
  const std::string swept = slurp(dir.sub("report.csv"));
  CHECK(std::count(swept.begin(), swept.end(), '\n') == 3);  // header + 2 rows

  // report recomputes the identical table from the stored metrics
  fs::remove(dir.sub("report.csv"));
  run_report(cfg);
  CHECK(slurp(dir.sub("report.csv")) == swept);

  // a single worker produces the same bytes as two
  TempDir serial("sweep1");
  cfg.jobs = 1;
  cfg.out_dir = serial.str();
  run_sweep(cfg);
  CHECK(slurp(serial.sub("report.csv")) == swept);
}

TEST_CASE("train writes loadable checkpoints") {
  TempDir dir("train");
  ExperimentConfig cfg;
  cfg.sim.nodes = 40;
  cfg.sim.rounds = 60;  // train clamps to the warm-up boundary itself
  cfg.sim.warmup_rounds = 50;
  cfg.sim.initial_dataset_cap = 256;
  cfg.sim.manager.codec.initial_epochs = 20;
  cfg.seeds = {3};
  cfg.out_dir = dir.str();
  run_train(cfg);

  std::ifstream model(dir.sub("codec.model"));
  REQUIRE(model.good());
  const CodecModel codec = CodecModel::load(model);
  const std::vector<double> flat(static_cast<size_t>(codec.cfg.data_dim), 0.9);
  CHECK(reconstruction_loss(codec, flat) >= 0.0);

  std::stringstream thr(slurp(dir.sub("thresholds.txt")));
  std::string t1, t2;
  thr >> t1 >> t2;
  CHECK(parse_double(t1) > 0.0);
  CHECK(parse_double(t2) >= parse_double(t1));
}

TEST_CASE("simulation failures carry round context") {
  ExperimentConfig cfg;
  cfg.sim.nodes = 5;  // too sparse to assemble a training batch
  cfg.sim.rounds = 10;
  cfg.sim.warmup_rounds = 5;
  cfg.seeds = {1};
  CHECK_THROWS_WITH_AS(execute_run(cfg.sim), doctest::Contains("round 5"), Error);
}

TEST_CASE("expected first decision round reproduces the closed form") {
  SimConfig cfg;  // l_w1 pi R^2 n / S^2 = 10 * pi * 625 * 100 / 10000
  CHECK(expected_first_decision_round(cfg) == doctest::Approx(196.3495).epsilon(1e-6));
}
