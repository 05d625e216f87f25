/*
 * Config parsing, run execution, and artifact writing for the cli. Configs
 * are flat `key = value` text; artifacts are metrics.csv / summary.json per
 * run, report.csv per sweep, and model checkpoint files from `train`.
 */

#include "gantrust/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <climits>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"

namespace fs = std::filesystem;

namespace gantrust {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& what) {
  throw ValidationError(key + ": " + what);
}

double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty() || errno == ERANGE ||
      !std::isfinite(x))
    bad_value(key, "expected a finite number, got '" + v + "'");
  return x;
}

long long to_ll(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty() || errno == ERANGE)
    bad_value(key, "expected an integer, got '" + v + "'");
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_ll(key, v);
  if (x < INT_MIN || x > INT_MAX) bad_value(key, "out of range");
  return static_cast<int>(x);
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  if (!v.empty() && v[0] == '-') bad_value(key, "must be non-negative");
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty() || errno == ERANGE)
    bad_value(key, "expected a non-negative integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, "expected true/false/1/0, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(v);
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (!v.empty() && v.back() == ',') out.push_back("");
  return out;
}

std::string fmt_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return ec == std::errc() ? std::string(buf, p) : std::string("nan");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F fmt) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += fmt(xs[i]);
  }
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

void finish_out(std::ofstream& os, const std::string& path) {
  os.flush();
  if (!os) throw IoError("write failed: " + path);
}

void make_dirs(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

// drives all rounds, tagging failures with the round they happened in
void run_world(World& w) {
  const SimConfig& cfg = w.config();
  while (w.current_round() < cfg.rounds) {
    const int r = w.current_round();
    try {
      w.simulate_round();
    } catch (const std::exception& e) {
      throw Error("round " + std::to_string(r) + ": " + e.what());
    }
  }
  try {
    w.run();  // no rounds left: boundary training (if due) + result assembly
  } catch (const std::exception& e) {
    throw Error("round " + std::to_string(cfg.rounds) + ": " + e.what());
  }
}

SimConfig run_config(const ExperimentConfig& cfg, double pct, uint64_t seed) {
  SimConfig run = cfg.sim;
  run.malicious_pct = pct;
  run.seed = seed;
  if (cfg.baseline) run.trust_enabled = false;
  return run;
}

nlohmann::ordered_json config_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, value] : config_echo(cfg)) j[key] = value;
  return j;
}

void write_summary_json(const std::string& path, const ExperimentConfig& echo,
                        const SummaryStats& s, uint64_t seed) {
  nlohmann::ordered_json j;
  j["detection_rate"] = s.detection_rate;
  j["false_positive_rate"] = s.false_positive_rate;
  j["tp"] = s.tp;
  j["malicious_decisions"] = s.malicious_decisions;
  j["fp"] = s.fp;
  j["benign_decisions"] = s.benign_decisions;
  j["attacks_drop"] = s.attacks_drop;
  j["attacks_delay"] = s.attacks_delay;
  j["throughput"] = s.throughput;
  j["lifetime"] = s.lifetime;
  j["lifetime_censored"] = s.lifetime_censored;
  j["rounds"] = s.rounds;
  j["config"] = config_json(echo);
  j["seed"] = seed;
  std::ofstream os = open_out(path);
  os << j.dump(2) << "\n";
  finish_out(os, path);
}

struct RunRecord {
  double pct = 0.0;
  uint64_t seed = 0;
  SummaryStats summary;
};

std::vector<ReportRow> aggregate_records(std::vector<RunRecord> runs) {
  std::sort(runs.begin(), runs.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.pct, a.seed) < std::tie(b.pct, b.seed);
  });
  std::vector<std::pair<double, SummaryStats>> flat;
  flat.reserve(runs.size());
  for (const RunRecord& r : runs) flat.push_back({r.pct, r.summary});
  return aggregate_report(flat);
}

void write_run_artifacts(const ExperimentConfig& cfg, const SimConfig& run,
                         const std::string& dir, const RunResult& result) {
  make_dirs(dir);
  write_metrics_csv(dir + "/metrics.csv", result.rounds);
  if (run.trace_decisions) write_traces_csv(dir + "/traces.csv", result.traces);
  ExperimentConfig echo = cfg;
  echo.sim = run;
  echo.seeds = {run.seed};
  write_summary_json(dir + "/summary.json", echo, result.summary, run.seed);
}

}  // namespace

void apply_setting(ExperimentConfig& cfg, const std::string& key,
                   const std::string& value) {
  SimConfig& s = cfg.sim;
  ManagerConfig& m = s.manager;
  if (key == "nodes") s.nodes = to_int(key, value);
  else if (key == "field") s.field = to_double(key, value);
  else if (key == "radius") s.radius = to_double(key, value);
  else if (key == "sink_x") s.sink_x = to_double(key, value);
  else if (key == "sink_y") s.sink_y = to_double(key, value);
  else if (key == "rounds") s.rounds = to_int(key, value);
  else if (key == "warmup_rounds") s.warmup_rounds = to_int(key, value);
  else if (key == "malicious_pct") s.malicious_pct = to_double(key, value);
  else if (key == "p_cluster") s.p_cluster = to_double(key, value);
  else if (key == "p_attack") s.p_attack = to_double(key, value);
  else if (key == "p_bad") s.p_bad = to_double(key, value);
  else if (key == "tier_normal") s.tier_normal = to_double(key, value);
  else if (key == "tier_advanced") s.tier_advanced = to_double(key, value);
  else if (key == "tier_super") s.tier_super = to_double(key, value);
  else if (key == "frames_per_round") s.frames_per_round = to_int(key, value);
  else if (key == "packet_bits") s.packet_bits = to_int(key, value);
  else if (key == "control_bits") s.control_bits = to_int(key, value);
  else if (key == "initial_energy") s.initial_energy = to_double(key, value);
  else if (key == "e_elec") s.e_elec = to_double(key, value);
  else if (key == "eps_fs") s.eps_fs = to_double(key, value);
  else if (key == "eps_mp") s.eps_mp = to_double(key, value);
  else if (key == "l_w") s.l_w = to_int(key, value);
  else if (key == "l_w1") {
    // window length feeds the classifier and redemption input sizes
    s.l_w1 = to_int(key, value);
    m.codec.data_dim = s.l_w1;
    m.redemption.seq_len = s.l_w1;
  } else if (key == "l_w2") {
    s.l_w2 = to_int(key, value);
    m.redemption.window = s.l_w2;
  } else if (key == "alpha") s.alpha = to_double(key, value);
  else if (key == "beta") s.beta = to_double(key, value);
  else if (key == "lower_scale") s.lower_scale = to_double(key, value);
  else if (key == "trust_enabled") s.trust_enabled = to_bool(key, value);
  else if (key == "per_node_models") s.per_node_models = to_bool(key, value);
  else if (key == "channel_per_link") s.channel_per_link = to_bool(key, value);
  else if (key == "initial_dataset_cap") s.initial_dataset_cap = to_int(key, value);
  else if (key == "trace_decisions") s.trace_decisions = to_bool(key, value);
  else if (key == "admit_factor") m.admit_factor = to_double(key, value);
  else if (key == "min_recommendations") m.min_recommendations = to_int(key, value);
  else if (key == "update_batches") m.update_batches = to_int(key, value);
  else if (key == "redemption_initial_batches")
    m.redemption_initial_batches = to_int(key, value);
  else if (key == "buffer_cap_batches") m.buffer_cap_batches = to_int(key, value);
  else if (key == "codec_latent_dim") m.codec.latent_dim = to_int(key, value);
  else if (key == "codec_batch_size") m.codec.batch_size = to_int(key, value);
  else if (key == "codec_initial_epochs") m.codec.initial_epochs = to_int(key, value);
  else if (key == "codec_update_epochs") m.codec.update_epochs = to_int(key, value);
  else if (key == "codec_lr") m.codec.lr = to_double(key, value);
  else if (key == "codec_gen_h1") m.codec.gen_h1 = to_int(key, value);
  else if (key == "codec_gen_h2") m.codec.gen_h2 = to_int(key, value);
  else if (key == "codec_gen_h3") m.codec.gen_h3 = to_int(key, value);
  else if (key == "redemption_batch_size")
    m.redemption.batch_size = to_int(key, value);
  else if (key == "redemption_initial_epochs")
    m.redemption.initial_epochs = to_int(key, value);
  else if (key == "redemption_update_epochs")
    m.redemption.update_epochs = to_int(key, value);
  else if (key == "redemption_lr") m.redemption.lr = to_double(key, value);
  else if (key == "out") {
    if (value.empty()) bad_value(key, "must name a directory");
    cfg.out_dir = value;
  } else if (key == "seeds") {
    std::vector<uint64_t> seeds;
    for (const std::string& tok : split_list(value))
      seeds.push_back(to_u64(key, tok));
    if (seeds.empty()) bad_value(key, "need at least one seed");
    cfg.seeds = std::move(seeds);
  } else if (key == "sweep_pcts") {
    std::vector<double> pcts;
    for (const std::string& tok : split_list(value)) {
      const double p = to_double(key, tok);
      if (p < 0.0 || p > 100.0) bad_value(key, "percentages must lie in [0, 100]");
      pcts.push_back(p);
    }
    cfg.sweep_pcts = std::move(pcts);
  } else if (key == "baseline") cfg.baseline = to_bool(key, value);
  else if (key == "jobs") cfg.jobs = to_int(key, value);
  else throw ValidationError("unknown key '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected key = value, got '" + stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw ParseError("line " + std::to_string(lineno) + ": missing key");
    try {
      apply_setting(cfg, key, value);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read config file: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

void validate(const ExperimentConfig& cfg) {
  validate(cfg.sim);
  if (cfg.seeds.empty()) throw ValidationError("seeds: need at least one seed");
  for (double p : cfg.sweep_pcts)
    if (p < 0.0 || p > 100.0)
      throw ValidationError("sweep_pcts: percentages must lie in [0, 100]");
  if (cfg.jobs < 1) throw ValidationError("jobs: need at least one worker");
  if (cfg.out_dir.empty()) throw ValidationError("out: must name a directory");
}

std::vector<std::pair<std::string, std::string>> config_echo(
    const ExperimentConfig& cfg) {
  const SimConfig& s = cfg.sim;
  const ManagerConfig& m = s.manager;
  std::vector<std::pair<std::string, std::string>> out;
  auto add = [&](const char* k, std::string v) { out.emplace_back(k, std::move(v)); };
  add("nodes", std::to_string(s.nodes));
  add("field", fmt_double(s.field));
  add("radius", fmt_double(s.radius));
  add("sink_x", fmt_double(s.sink_x));
  add("sink_y", fmt_double(s.sink_y));
  add("rounds", std::to_string(s.rounds));
  add("warmup_rounds", std::to_string(s.warmup_rounds));
  add("malicious_pct", fmt_double(s.malicious_pct));
  add("p_cluster", fmt_double(s.p_cluster));
  add("p_attack", fmt_double(s.p_attack));
  add("p_bad", fmt_double(s.p_bad));
  add("tier_normal", fmt_double(s.tier_normal));
  add("tier_advanced", fmt_double(s.tier_advanced));
  add("tier_super", fmt_double(s.tier_super));
  add("frames_per_round", std::to_string(s.frames_per_round));
  add("packet_bits", std::to_string(s.packet_bits));
  add("control_bits", std::to_string(s.control_bits));
  add("initial_energy", fmt_double(s.initial_energy));
  add("e_elec", fmt_double(s.e_elec));
  add("eps_fs", fmt_double(s.eps_fs));
  add("eps_mp", fmt_double(s.eps_mp));
  add("l_w", std::to_string(s.l_w));
  add("l_w1", std::to_string(s.l_w1));
  add("l_w2", std::to_string(s.l_w2));
  add("alpha", fmt_double(s.alpha));
  add("beta", fmt_double(s.beta));
  add("lower_scale", fmt_double(s.lower_scale));
  add("trust_enabled", fmt_bool(s.trust_enabled));
  add("per_node_models", fmt_bool(s.per_node_models));
  add("channel_per_link", fmt_bool(s.channel_per_link));
  add("initial_dataset_cap", std::to_string(s.initial_dataset_cap));
  add("trace_decisions", fmt_bool(s.trace_decisions));
  add("admit_factor", fmt_double(m.admit_factor));
  add("min_recommendations", std::to_string(m.min_recommendations));
  add("update_batches", std::to_string(m.update_batches));
  add("redemption_initial_batches", std::to_string(m.redemption_initial_batches));
  add("buffer_cap_batches", std::to_string(m.buffer_cap_batches));
  add("codec_latent_dim", std::to_string(m.codec.latent_dim));
  add("codec_batch_size", std::to_string(m.codec.batch_size));
  add("codec_initial_epochs", std::to_string(m.codec.initial_epochs));
  add("codec_update_epochs", std::to_string(m.codec.update_epochs));
  add("codec_lr", fmt_double(m.codec.lr));
  add("codec_gen_h1", std::to_string(m.codec.gen_h1));
  add("codec_gen_h2", std::to_string(m.codec.gen_h2));
  add("codec_gen_h3", std::to_string(m.codec.gen_h3));
  add("redemption_batch_size", std::to_string(m.redemption.batch_size));
  add("redemption_initial_epochs", std::to_string(m.redemption.initial_epochs));
  add("redemption_update_epochs", std::to_string(m.redemption.update_epochs));
  add("redemption_lr", fmt_double(m.redemption.lr));
  add("out", cfg.out_dir);
  add("seeds", join(cfg.seeds, [](uint64_t x) { return std::to_string(x); }));
  add("sweep_pcts", join(cfg.sweep_pcts, fmt_double));
  add("baseline", fmt_bool(cfg.baseline));
  add("jobs", std::to_string(cfg.jobs));
  return out;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<RoundMetrics>& rows) {
  std::ofstream os = open_out(path);
  os << kMetricsHeader << "\n";
  for (const RoundMetrics& r : rows)
    os << r.round << ',' << r.heads << ',' << r.attacks_drop << ','
       << r.attacks_delay << ',' << r.det_tp << ',' << r.det_total_malicious
       << ',' << r.det_fp << ',' << r.det_total_benign << ',' << r.delivered
       << ',' << r.alive_benign << ',' << fmt_double(r.energy_total) << "\n";
  finish_out(os, path);
}

std::vector<RoundMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read metrics file: " + path);
  std::string line;
  if (!std::getline(is, line) || trim(line) != kMetricsHeader)
    throw ParseError(path + ": line 1: bad metrics header");
  std::vector<RoundMetrics> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_list(line);
    if (f.size() != 11)
      throw ParseError(path + ": line " + std::to_string(lineno) +
                       ": expected 11 fields, got " + std::to_string(f.size()));
    const std::string where = path + " field";
    try {
      RoundMetrics r;
      r.round = to_int(where, f[0]);
      r.heads = to_int(where, f[1]);
      r.attacks_drop = to_ll(where, f[2]);
      r.attacks_delay = to_ll(where, f[3]);
      r.det_tp = to_ll(where, f[4]);
      r.det_total_malicious = to_ll(where, f[5]);
      r.det_fp = to_ll(where, f[6]);
      r.det_total_benign = to_ll(where, f[7]);
      r.delivered = to_ll(where, f[8]);
      r.alive_benign = to_int(where, f[9]);
      r.energy_total = to_double(where, f[10]);
      rows.push_back(r);
    } catch (const ValidationError& e) {
      throw ParseError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_traces_csv(const std::string& path,
                      const std::vector<DecisionTrace>& rows) {
  auto cls_name = [](TrustClass c) {
    switch (c) {
      case TrustClass::trusted: return "trusted";
      case TrustClass::suspect: return "suspect";
      default: return "malicious";
    }
  };
  auto label_name = [](TrustLabel l) {
    switch (l) {
      case TrustLabel::trusted: return "trusted";
      case TrustLabel::redemption_trusted: return "redemption_trusted";
      default: return "untrusted";
    }
  };
  std::ofstream os = open_out(path);
  os << "round,decider,target,recommendations,loss,cooperation,class,label\n";
  for (const DecisionTrace& t : rows)
    os << t.round << ',' << t.decider << ',' << t.target << ','
       << t.recommendations << ',' << fmt_double(t.loss) << ','
       << fmt_double(t.cooperation) << ',' << cls_name(t.cls) << ','
       << label_name(t.label) << "\n";
  finish_out(os, path);
}

std::vector<ReportRow> aggregate_report(
    const std::vector<std::pair<double, SummaryStats>>& runs) {
  std::vector<ReportRow> rows;
  size_t i = 0;
  while (i < runs.size()) {
    size_t j = i;
    while (j < runs.size() && runs[j].first == runs[i].first) ++j;
    const size_t n = j - i;
    auto stats = [&](auto pick) {
      double mean = 0.0;
      for (size_t k = i; k < j; ++k) mean += pick(runs[k].second);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (size_t k = i; k < j; ++k) {
        const double d = pick(runs[k].second) - mean;
        var += d * d;
      }
      return std::pair<double, double>(mean, std::sqrt(var / static_cast<double>(n)));
    };
    ReportRow row;
    row.malicious_pct = runs[i].first;
    std::tie(row.detection_rate_mean, row.detection_rate_std) =
        stats([](const SummaryStats& s) { return s.detection_rate; });
    std::tie(row.false_positive_rate_mean, row.false_positive_rate_std) =
        stats([](const SummaryStats& s) { return s.false_positive_rate; });
    std::tie(row.attacks_drop_mean, row.attacks_drop_std) =
        stats([](const SummaryStats& s) { return double(s.attacks_drop); });
    std::tie(row.attacks_delay_mean, row.attacks_delay_std) =
        stats([](const SummaryStats& s) { return double(s.attacks_delay); });
    std::tie(row.lifetime_mean, row.lifetime_std) =
        stats([](const SummaryStats& s) { return double(s.lifetime); });
    std::tie(row.throughput_mean, row.throughput_std) =
        stats([](const SummaryStats& s) { return double(s.throughput); });
    rows.push_back(row);
    i = j;
  }
  return rows;
}

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::ofstream os = open_out(path);
  os << "malicious_pct,detection_rate_mean,detection_rate_std,"
        "false_positive_rate_mean,false_positive_rate_std,"
        "attacks_drop_mean,attacks_drop_std,attacks_delay_mean,"
        "attacks_delay_std,lifetime_mean,lifetime_std,"
        "throughput_mean,throughput_std\n";
  for (const ReportRow& r : rows)
    os << fmt_double(r.malicious_pct) << ',' << fmt_double(r.detection_rate_mean)
       << ',' << fmt_double(r.detection_rate_std) << ','
       << fmt_double(r.false_positive_rate_mean) << ','
       << fmt_double(r.false_positive_rate_std) << ','
       << fmt_double(r.attacks_drop_mean) << ',' << fmt_double(r.attacks_drop_std)
       << ',' << fmt_double(r.attacks_delay_mean) << ','
       << fmt_double(r.attacks_delay_std) << ',' << fmt_double(r.lifetime_mean)
       << ',' << fmt_double(r.lifetime_std) << ','
       << fmt_double(r.throughput_mean) << ',' << fmt_double(r.throughput_std)
       << "\n";
  finish_out(os, path);
}

std::string run_dir_name(double pct, uint64_t seed) {
  return "p" + fmt_double(pct) + "_s" + std::to_string(seed);
}

RunResult execute_run(const SimConfig& cfg) {
  World w(cfg);
  run_world(w);
  return w.result();
}

void run_simulate(const ExperimentConfig& cfg) {
  validate(cfg);
  const SimConfig run = run_config(cfg, cfg.sim.malicious_pct, cfg.seeds.front());
  const RunResult result = execute_run(run);
  write_run_artifacts(cfg, run, cfg.out_dir, result);
}

void run_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  make_dirs(cfg.out_dir);
  struct Job {
    double pct;
    uint64_t seed;
  };
  std::vector<Job> todo;
  for (double pct : cfg.sweep_pcts)
    for (uint64_t seed : cfg.seeds) todo.push_back({pct, seed});

  std::vector<RunRecord> records(todo.size());
  std::atomic<size_t> next{0};
  std::mutex fail_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      try {
        const SimConfig run = run_config(cfg, todo[i].pct, todo[i].seed);
        const RunResult result = execute_run(run);
        write_run_artifacts(cfg, run,
                            cfg.out_dir + "/" + run_dir_name(run.malicious_pct, run.seed),
                            result);
        records[i] = {run.malicious_pct, run.seed, result.summary};
      } catch (...) {
        std::lock_guard<std::mutex> lock(fail_mutex);
        if (!failure) failure = std::current_exception();
        next.store(todo.size());  // stop handing out work
        return;
      }
    }
  };
  const size_t workers =
      std::min<size_t>(static_cast<size_t>(cfg.jobs), std::max<size_t>(todo.size(), 1));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  write_report_csv(cfg.out_dir + "/report.csv", aggregate_records(records));
}

void run_train(const ExperimentConfig& cfg) {
  validate(cfg);
  SimConfig run = cfg.sim;
  run.seed = cfg.seeds.front();
  run.rounds = run.warmup_rounds;  // stop at the training boundary
  run.trust_enabled = true;
  if (run.warmup_rounds < 1)
    throw ValidationError("warmup_rounds: training needs a warm-up phase");
  World w(run);
  run_world(w);
  if (!w.trained()) throw StateError("training did not complete");

  make_dirs(cfg.out_dir);
  const std::string codec_path = cfg.out_dir + "/codec.model";
  {
    std::ofstream os = open_out(codec_path);
    w.trust_system().classifier().save(os);
    finish_out(os, codec_path);
  }
  const std::string thr_path = cfg.out_dir + "/thresholds.txt";
  {
    std::ofstream os = open_out(thr_path);
    os << std::hexfloat << w.trust_system().thresholds().tr1 << " "
       << w.trust_system().thresholds().tr2 << "\n";
    finish_out(os, thr_path);
  }
  if (w.trust_system().redemption_ready()) {
    const std::string red_path = cfg.out_dir + "/redemption.model";
    std::ofstream os = open_out(red_path);
    w.trust_system().redemption().save(os);
    finish_out(os, red_path);
  }
}

void run_report(const ExperimentConfig& cfg) {
  validate(cfg);
  char nr[64];
  std::snprintf(nr, sizeof(nr), "%.2f", expected_first_decision_round(cfg.sim));
  std::printf("N_r = %s\n", nr);

  std::vector<RunRecord> records;
  std::error_code ec;
  for (const fs::directory_entry& entry :
       fs::directory_iterator(cfg.out_dir, ec)) {
    if (ec) break;
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    const size_t sep = name.rfind("_s");
    if (name.size() < 4 || name[0] != 'p' || sep == std::string::npos || sep < 2)
      continue;
    double pct = 0.0;
    uint64_t seed = 0;
    try {
      pct = to_double("run directory", name.substr(1, sep - 1));
      seed = to_u64("run directory", name.substr(sep + 2));
    } catch (const ValidationError&) {
      continue;  // unrelated directory
    }
    const std::string metrics = entry.path().string() + "/metrics.csv";
    if (!fs::exists(metrics)) continue;  // incomplete run, nothing to recompute
    const std::vector<RoundMetrics> rows = read_metrics_csv(metrics);
    if (rows.empty())
      throw DataError(metrics + ": no metric rows");
    records.push_back({pct, seed, summarize_metrics(rows)});
  }
  if (records.empty()) {
    std::printf("no runs under %s\n", cfg.out_dir.c_str());
    return;
  }
  const std::vector<ReportRow> rows = aggregate_records(records);
  write_report_csv(cfg.out_dir + "/report.csv", rows);
  std::printf("report.csv: %zu rows from %zu runs\n", rows.size(), records.size());
}

}  // namespace gantrust
