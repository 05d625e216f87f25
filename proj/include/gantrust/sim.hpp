#pragma once

/*
 * Clustered WSN round simulator. Nodes deploy uniformly on a square field,
 * elect cluster heads LEACH-style, and push sensor packets through heads to
 * the sink over TDMA frames. Malicious nodes acting as heads drop, tamper
 * with, or delay member packets; members log per-packet evidence bits about
 * their head and, once enough evidence exists, run the embedded trust system
 * to avoid untrusted heads. A warm-up phase with inactive attackers collects
 * the benign evidence that trains the initial classifier.
 */

#include <array>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "gantrust/errors.hpp"
#include "gantrust/fuzzy.hpp"
#include "gantrust/manager.hpp"
#include "gantrust/rng.hpp"

namespace gantrust {

struct SimConfig {
  int nodes = 100;
  double field = 100.0;  // side of the square deployment area
  double radius = 25.0;  // cluster / neighborhood radius
  double sink_x = 50.0;
  double sink_y = 50.0;
  int rounds = 500;        // total rounds, warm-up included
  int warmup_rounds = 50;  // attackers inactive; evidence feeds initial training
  double malicious_pct = 30.0;
  double p_cluster = 0.07;  // desired cluster-head fraction
  double p_attack = 0.1;    // base attack probability, scaled by tier
  double p_bad = 0.1;       // bad-state probability of the channel chain
  double tier_normal = 0.3;  // malicious tier shares (multipliers 1/2/3)
  double tier_advanced = 0.4;
  double tier_super = 0.3;
  int frames_per_round = 4;  // member packets (= evidence bits) per round
  int packet_bits = 3000;
  int control_bits = 300;
  double initial_energy = 1.3;   // joules
  double e_elec = 50e-9;         // J/bit electronics
  double eps_fs = 10e-12;        // J/bit/m^2 free-space amp
  double eps_mp = 0.0013e-12;    // J/bit/m^4 multipath amp
  int l_w = 15;   // evidence window per attribute pair
  int l_w1 = 10;  // trust-vector length (window positions)
  int l_w2 = 4;   // attack-vector window
  double alpha = 0.5;
  double beta = 0.5;
  double lower_scale = 0.8;
  bool trust_enabled = true;
  bool per_node_models = false;   // clone the trained system per node
  bool channel_per_link = false;  // one chain per directed link instead of per node
  int initial_dataset_cap = 2048;
  bool trace_decisions = false;
  uint64_t seed = 1;
  ManagerConfig manager;
};

// throws ValidationError naming the offending key
void validate(const SimConfig& cfg);

enum class Tier { honest = 0, normal = 1, advanced = 2, super = 3 };

enum class Role { member, head, sink_direct };

// per-observer state about one neighbor
struct NeighborState {
  EvidenceLog log;
  bool link_bad = false;  // channel_per_link mode only
  bool has_decision = false;
  TrustLabel last_label = TrustLabel::trusted;
  int first_decision_round = -1;

  explicit NeighborState(int log_cap) : log(log_cap) {}
};

struct Node {
  int id = 0;
  double x = 0.0, y = 0.0;
  Tier tier = Tier::honest;
  bool alive = true;
  Role role = Role::member;
  int head_id = -1;             // assigned head while a member
  int last_head_round = -1000;  // most recent round served as head
  double charged = 0.0;         // total energy drawn so far
  bool channel_bad = false;
  std::unordered_map<int, NeighborState> obs;  // keyed by neighbor id
};

struct RoundMetrics {
  int round = 0;
  int heads = 0;
  long long attacks_drop = 0;   // executed drop-or-tamper events
  long long attacks_delay = 0;  // executed delay events
  long long det_tp = 0;              // malicious neighbor labeled untrusted
  long long det_total_malicious = 0;  // decisions about malicious neighbors
  long long det_fp = 0;              // benign neighbor labeled untrusted
  long long det_total_benign = 0;    // decisions about benign neighbors
  long long delivered = 0;  // benign-origin packets that reached the sink intact
  int alive_benign = 0;
  double energy_total = 0.0;  // residual energy summed over all nodes
};

struct SummaryStats {
  double detection_rate = 0.0;       // tp / malicious decisions (0 if none)
  double false_positive_rate = 0.0;  // fp / benign decisions (0 if none)
  long long tp = 0;
  long long malicious_decisions = 0;
  long long fp = 0;
  long long benign_decisions = 0;
  long long attacks_drop = 0;
  long long attacks_delay = 0;
  long long throughput = 0;   // delivered total
  int lifetime = 0;           // 1-based round of the first benign death
  bool lifetime_censored = false;  // true when no benign node died
  int rounds = 0;
};

struct DecisionTrace {
  int round = 0;
  int decider = 0;
  int target = 0;
  int recommendations = 0;
  double loss = 0.0;
  double cooperation = -1.0;
  TrustClass cls = TrustClass::trusted;
  TrustLabel label = TrustLabel::trusted;
};

struct RunResult {
  std::vector<RoundMetrics> rounds;
  SummaryStats summary;
  // mean 1-based round of the first real trust decision, over directed
  // observer->target pairs that ever decided
  double mean_first_decision_round = 0.0;
  long long first_decision_pairs = 0;
  std::vector<DecisionTrace> traces;  // filled when cfg.trace_decisions
};

// LEACH election threshold for a node that has not served recently
double head_election_threshold(double p_c, int round);

// analytic estimate of the round when trust decisions start:
// l_w1 * pi * R^2 * n / field^2 rounds of shared cluster membership
double expected_first_decision_round(const SimConfig& cfg);

// first-order radio model
double tx_cost(const SimConfig& cfg, int bits, double dist);
double rx_cost(const SimConfig& cfg, int bits);

// two-state Gilbert channel step; stationary bad-probability is p_bad
bool step_channel(bool bad, double p_bad, Rng& rng);

// largest-remainder split of count over three shares
std::array<int, 3> split_tiers(int count, double a, double b, double c);

SummaryStats summarize_metrics(const std::vector<RoundMetrics>& series);

class World {
 public:
  explicit World(SimConfig cfg);

  // all rounds plus warm-up training (even when rounds == warmup_rounds)
  void run();
  void simulate_round();

  int current_round() const { return round_; }
  const RunResult& result() const { return result_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const SimConfig& config() const { return cfg_; }
  const TrustSystem& trust_system() const { return *system_; }
  const std::vector<std::vector<double>>& initial_dataset() const {
    return initial_dataset_;
  }
  double charged_total() const { return charged_total_; }
  bool trained() const { return trained_; }

  // directed-pair first-decision aggregation; also stored in result()
  void finalize_result();

 private:
  void deploy();
  void finalize_warmup();  // dataset assembly + initial training + log reset
  void elect_heads();
  void form_clusters();
  void run_frames();
  void probe_frame();
  bool probing() const;
  void append_metrics_row();

  TrustSystem& system_for(int node_id);
  NeighborState& obs_of(Node& m, int target);
  int gather_recommendations(const Node& m, int target);
  bool observed_link_bad(Node& m, int target);
  void charge(Node& n, double joules);
  double dist_to_sink(const Node& n) const;
  bool attackers_active() const { return round_ >= cfg_.warmup_rounds; }
  bool decisions_enabled() const { return cfg_.trust_enabled && trained_; }
  int min_decision_bits() const { return cfg_.l_w + cfg_.l_w1 - 1; }

  SimConfig cfg_;
  FuzzyConfig fuzzy_;
  std::vector<Node> nodes_;
  std::vector<std::vector<int>> neighbor_ids_;  // within radius, id-sorted
  std::vector<std::vector<int>> members_;       // member ids per head id, per round
  std::vector<int> head_ids_;                   // heads of the current round
  std::unique_ptr<TrustSystem> system_;
  std::vector<std::unique_ptr<TrustSystem>> node_systems_;  // per_node_models
  std::vector<std::vector<double>> initial_dataset_;
  std::vector<Rng> elect_rng_, chan_rng_, attack_rng_, decide_rng_;
  Rng data_rng_;
  int round_ = 0;
  bool trained_ = false;
  double charged_total_ = 0.0;
  RunResult result_;
  RoundMetrics row_;  // accumulator for the round in progress
};

RunResult run_simulation(const SimConfig& cfg);

}  // namespace gantrust
