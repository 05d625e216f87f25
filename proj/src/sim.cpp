#include "gantrust/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "gantrust/codec.hpp"
#include "gantrust/redemption.hpp"

namespace gantrust {

namespace {

// sub-stream tags off the master seed
constexpr uint64_t kDeployTag = 1;
constexpr uint64_t kElectTag = 2;
constexpr uint64_t kChanTag = 3;
constexpr uint64_t kAttackTag = 4;
constexpr uint64_t kDecideTag = 5;
constexpr uint64_t kDataTag = 6;
constexpr uint64_t kSystemTag = 7;

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ValidationError(key + ": " + what);
}

double dist(const Node& a, const Node& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

void validate(const SimConfig& c) {
  require(c.nodes >= 1, "nodes", "need at least one node");
  require(c.field > 0.0, "field", "must be positive");
  require(c.radius >= 0.0, "radius", "must be non-negative");
  require(c.rounds >= 1, "rounds", "need at least one round");
  require(c.warmup_rounds >= 0 && c.warmup_rounds <= c.rounds, "warmup_rounds",
          "must lie in [0, rounds]");
  require(c.malicious_pct >= 0.0 && c.malicious_pct <= 100.0, "malicious_pct",
          "must lie in [0, 100]");
  require(c.p_cluster > 0.0 && c.p_cluster < 1.0, "p_cluster",
          "must lie in (0, 1)");
  require(c.p_attack >= 0.0 && c.p_attack <= 1.0, "p_attack",
          "must lie in [0, 1]");
  require(c.p_bad >= 0.0 && c.p_bad <= 1.0, "p_bad", "must lie in [0, 1]");
  require(c.tier_normal >= 0.0 && c.tier_advanced >= 0.0 && c.tier_super >= 0.0,
          "tier shares", "must be non-negative");
  require(std::abs(c.tier_normal + c.tier_advanced + c.tier_super - 1.0) <= 1e-9,
          "tier shares", "must sum to 1");
  require(c.frames_per_round >= 1, "frames_per_round", "need at least one frame");
  require(c.packet_bits >= 1, "packet_bits", "must be positive");
  require(c.control_bits >= 1, "control_bits", "must be positive");
  require(c.initial_energy > 0.0, "initial_energy", "must be positive");
  require(c.e_elec > 0.0 && c.eps_fs > 0.0 && c.eps_mp > 0.0, "radio constants",
          "must be positive");
  require(c.l_w >= 1, "l_w", "must be positive");
  require(c.l_w1 >= 1, "l_w1", "must be positive");
  require(c.l_w2 >= 1 && c.l_w2 <= c.l_w1, "l_w2", "must lie in [1, l_w1]");
  require(c.alpha >= 0.0 && c.beta >= 0.0 &&
              std::abs(c.alpha + c.beta - 1.0) <= 1e-9,
          "alpha/beta", "must be non-negative and sum to 1");
  require(c.lower_scale >= 0.0 && c.lower_scale <= 1.0, "lower_scale",
          "must lie in [0, 1]");
  require(c.initial_dataset_cap >= c.manager.codec.batch_size,
          "initial_dataset_cap", "must cover at least one training batch");
  require(c.l_w1 == c.manager.codec.data_dim, "l_w1",
          "must match the classifier input size");
  require(c.l_w1 == c.manager.redemption.seq_len &&
              c.l_w2 == c.manager.redemption.window,
          "l_w1/l_w2", "must match the redemption sequence geometry");
}

double head_election_threshold(double p_c, int round) {
  if (!(p_c > 0.0 && p_c < 1.0)) throw DomainError("p_c must lie in (0, 1)");
  const double denom = 1.0 - p_c * std::fmod(static_cast<double>(round), 1.0 / p_c);
  if (denom <= 1e-12) return 1.0;
  return std::clamp(p_c / denom, 0.0, 1.0);
}

double expected_first_decision_round(const SimConfig& cfg) {
  if (cfg.field <= 0.0) throw DomainError("field must be positive");
  return static_cast<double>(cfg.l_w1) * std::numbers::pi * cfg.radius *
         cfg.radius * static_cast<double>(cfg.nodes) / (cfg.field * cfg.field);
}

double tx_cost(const SimConfig& cfg, int bits, double d) {
  if (bits < 0 || d < 0.0) throw DomainError("tx_cost needs bits >= 0, dist >= 0");
  const double d0 = std::sqrt(cfg.eps_fs / cfg.eps_mp);
  const double amp = d < d0 ? cfg.eps_fs * d * d : cfg.eps_mp * d * d * d * d;
  return static_cast<double>(bits) * (cfg.e_elec + amp);
}

double rx_cost(const SimConfig& cfg, int bits) {
  if (bits < 0) throw DomainError("rx_cost needs bits >= 0");
  return static_cast<double>(bits) * cfg.e_elec;
}

bool step_channel(bool bad, double p_bad, Rng& rng) {
  if (p_bad < 0.0 || p_bad > 1.0) throw DomainError("p_bad must lie in [0, 1]");
  const double u = rng.uniform01();
  return bad ? u >= 1.0 - p_bad : u < p_bad;
}

std::array<int, 3> split_tiers(int count, double a, double b, double c) {
  if (count < 0) throw DomainError("split_tiers needs count >= 0");
  const double total = a + b + c;
  if (!(total > 0.0)) throw DomainError("tier shares must sum to a positive value");
  const double quota[3] = {count * a / total, count * b / total, count * c / total};
  std::array<int, 3> out{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    out[i] = static_cast<int>(std::floor(quota[i]));
    assigned += out[i];
  }
  int order[3] = {0, 1, 2};
  std::sort(order, order + 3, [&](int i, int j) {
    const double fi = quota[i] - std::floor(quota[i]);
    const double fj = quota[j] - std::floor(quota[j]);
    return fi != fj ? fi > fj : i < j;
  });
  for (int k = 0; k < count - assigned; ++k) out[order[k % 3]] += 1;
  return out;
}

SummaryStats summarize_metrics(const std::vector<RoundMetrics>& series) {
  if (series.empty()) throw DataError("metric series is empty");
  SummaryStats s;
  s.rounds = static_cast<int>(series.size());
  const int baseline = series.front().alive_benign;
  s.lifetime = series.back().round + 1;
  s.lifetime_censored = true;
  for (const RoundMetrics& row : series) {
    s.tp += row.det_tp;
    s.malicious_decisions += row.det_total_malicious;
    s.fp += row.det_fp;
    s.benign_decisions += row.det_total_benign;
    s.attacks_drop += row.attacks_drop;
    s.attacks_delay += row.attacks_delay;
    s.throughput += row.delivered;
    if (s.lifetime_censored && row.alive_benign < baseline) {
      s.lifetime = row.round + 1;
      s.lifetime_censored = false;
    }
  }
  if (s.malicious_decisions > 0)
    s.detection_rate = static_cast<double>(s.tp) /
                       static_cast<double>(s.malicious_decisions);
  if (s.benign_decisions > 0)
    s.false_positive_rate =
        static_cast<double>(s.fp) / static_cast<double>(s.benign_decisions);
  return s;
}

World::World(SimConfig cfg) : cfg_(std::move(cfg)), data_rng_(0) {
  validate(cfg_);
  fuzzy_.alpha = cfg_.alpha;
  fuzzy_.beta = cfg_.beta;
  fuzzy_.lower_scale = cfg_.lower_scale;
  data_rng_ = derive_stream(cfg_.seed, kDataTag, 0);
  system_ = std::make_unique<TrustSystem>(
      cfg_.manager, derive_stream(cfg_.seed, kSystemTag, 0).next_u64());
  deploy();
}

void World::deploy() {
  const int n = cfg_.nodes;
  Rng place = derive_stream(cfg_.seed, kDeployTag, 0);

  nodes_.assign(static_cast<size_t>(n), Node{});
  elect_rng_.reserve(n);
  chan_rng_.reserve(n);
  attack_rng_.reserve(n);
  decide_rng_.reserve(n);
  for (int i = 0; i < n; ++i) {
    Node& nd = nodes_[static_cast<size_t>(i)];
    nd.id = i;
    nd.x = place.uniform01() * cfg_.field;
    nd.y = place.uniform01() * cfg_.field;
    nd.last_head_round = std::numeric_limits<int>::min() / 2;
    elect_rng_.push_back(derive_stream(cfg_.seed, kElectTag, static_cast<uint64_t>(i)));
    chan_rng_.push_back(derive_stream(cfg_.seed, kChanTag, static_cast<uint64_t>(i)));
    attack_rng_.push_back(derive_stream(cfg_.seed, kAttackTag, static_cast<uint64_t>(i)));
    decide_rng_.push_back(derive_stream(cfg_.seed, kDecideTag, static_cast<uint64_t>(i)));
  }

  // channels start at the stationary distribution of the two-state chain
  for (int i = 0; i < n; ++i)
    nodes_[static_cast<size_t>(i)].channel_bad = chan_rng_[static_cast<size_t>(i)].bernoulli(cfg_.p_bad);

  const int malicious = static_cast<int>(std::llround(n * cfg_.malicious_pct / 100.0));
  std::vector<int> ids(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = i;
  place.shuffle(ids);
  const std::array<int, 3> tiers =
      split_tiers(malicious, cfg_.tier_normal, cfg_.tier_advanced, cfg_.tier_super);
  int at = 0;
  for (int k = 0; k < tiers[0]; ++k) nodes_[static_cast<size_t>(ids[at++])].tier = Tier::normal;
  for (int k = 0; k < tiers[1]; ++k) nodes_[static_cast<size_t>(ids[at++])].tier = Tier::advanced;
  for (int k = 0; k < tiers[2]; ++k) nodes_[static_cast<size_t>(ids[at++])].tier = Tier::super;

  neighbor_ids_.assign(static_cast<size_t>(n), {});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && dist(nodes_[static_cast<size_t>(i)], nodes_[static_cast<size_t>(j)]) <= cfg_.radius)
        neighbor_ids_[static_cast<size_t>(i)].push_back(j);
}

TrustSystem& World::system_for(int node_id) {
  if (cfg_.per_node_models && !node_systems_.empty())
    return *node_systems_[static_cast<size_t>(node_id)];
  return *system_;
}

NeighborState& World::obs_of(Node& m, int target) {
  auto [it, inserted] = m.obs.try_emplace(target, 2 * (cfg_.l_w + cfg_.l_w1));
  if (inserted && cfg_.channel_per_link)
    it->second.link_bad = chan_rng_[static_cast<size_t>(m.id)].bernoulli(cfg_.p_bad);
  return it->second;
}

bool World::observed_link_bad(Node& m, int target) {
  if (!cfg_.channel_per_link) return m.channel_bad;
  NeighborState& st = obs_of(m, target);
  st.link_bad = step_channel(st.link_bad, cfg_.p_bad, chan_rng_[static_cast<size_t>(m.id)]);
  return st.link_bad;
}

void World::charge(Node& n, double joules) {
  if (!n.alive || joules <= 0.0) return;
  n.charged += joules;
  charged_total_ += joules;
  if (n.charged >= cfg_.initial_energy) n.alive = false;  // dies completing the act
}

double World::dist_to_sink(const Node& n) const {
  return std::hypot(n.x - cfg_.sink_x, n.y - cfg_.sink_y);
}

void World::elect_heads() {
  head_ids_.clear();
  members_.assign(static_cast<size_t>(cfg_.nodes), {});
  const int cooldown = static_cast<int>(std::ceil(1.0 / cfg_.p_cluster));
  const double threshold = head_election_threshold(cfg_.p_cluster, round_);
  for (Node& nd : nodes_) {
    if (!nd.alive) continue;
    nd.role = Role::member;
    nd.head_id = -1;
    if (round_ - nd.last_head_round < cooldown) continue;
    if (elect_rng_[static_cast<size_t>(nd.id)].uniform01() < threshold) {
      nd.role = Role::head;
      nd.last_head_round = round_;
      head_ids_.push_back(nd.id);
    }
  }
}

int World::gather_recommendations(const Node& m, int target) {
  Node& self = nodes_[static_cast<size_t>(m.id)];
  int recs = 0;
  for (int nid : neighbor_ids_[static_cast<size_t>(m.id)]) {
    if (nid == target) continue;
    Node& nb = nodes_[static_cast<size_t>(nid)];
    if (!nb.alive) continue;
    auto it = self.obs.find(nid);
    const bool neighbor_trusted = it == self.obs.end() || !it->second.has_decision ||
                                  it->second.last_label != TrustLabel::untrusted;
    if (!neighbor_trusted) continue;
    charge(self, tx_cost(cfg_, cfg_.control_bits, dist(self, nb)));
    charge(nb, rx_cost(cfg_, cfg_.control_bits));
    auto jt = nb.obs.find(target);
    if (jt != nb.obs.end() && jt->second.has_decision &&
        jt->second.last_label != TrustLabel::untrusted)
      ++recs;
  }
  return recs;
}

void World::form_clusters() {
  for (Node& m : nodes_) {
    if (!m.alive || m.role == Role::head) continue;
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int hid : neighbor_ids_[static_cast<size_t>(m.id)]) {
      Node& h = nodes_[static_cast<size_t>(hid)];
      if (!h.alive || h.role != Role::head) continue;
      bool acceptable = true;
      if (decisions_enabled()) {
        NeighborState& st = obs_of(m, hid);
        if (st.log.size() >= min_decision_bits()) {
          const auto tv = evaluate_trust_series(st.log, cfg_.l_w, cfg_.l_w1, fuzzy_);
          const auto av = build_attack_vector(st.log, cfg_.l_w1, cfg_.l_w2);
          TrustSystem& sys = system_for(m.id);
          int recs = 0;
          const double loss = reconstruction_loss(sys.classifier(), tv);
          if (classify_loss(loss, sys.thresholds()) == TrustClass::suspect)
            recs = gather_recommendations(m, hid);
          const TrustDecision d =
              sys.decide(tv, av, recs, decide_rng_[static_cast<size_t>(m.id)]);
          st.has_decision = true;
          st.last_label = d.label;
          if (st.first_decision_round < 0) st.first_decision_round = round_ + 1;
          if (h.tier != Tier::honest) {
            ++row_.det_total_malicious;
            if (d.label == TrustLabel::untrusted) ++row_.det_tp;
          } else {
            ++row_.det_total_benign;
            if (d.label == TrustLabel::untrusted) ++row_.det_fp;
          }
          if (cfg_.trace_decisions)
            result_.traces.push_back({round_, m.id, hid, d.recommendations,
                                      d.loss, d.cooperation, d.cls, d.label});
          acceptable = d.label != TrustLabel::untrusted;
        }
      }
      if (!acceptable) continue;
      const double dd = dist(m, h);
      if (dd < best_dist) {
        best_dist = dd;
        best = hid;
      }
    }
    if (best >= 0) {
      m.head_id = best;
      members_[static_cast<size_t>(best)].push_back(m.id);
      continue;
    }
    const int cooldown = static_cast<int>(std::ceil(1.0 / cfg_.p_cluster));
    if (round_ - m.last_head_round >= cooldown) {
      m.role = Role::head;  // no head worth joining: serve (at least) itself
      m.last_head_round = round_;
      head_ids_.push_back(m.id);
    } else {
      m.role = Role::sink_direct;
    }
  }
}

void World::run_frames() {
  for (int frame = 0; frame < cfg_.frames_per_round; ++frame) {
    if (!cfg_.channel_per_link)
      for (Node& nd : nodes_)
        if (nd.alive)
          nd.channel_bad = step_channel(nd.channel_bad, cfg_.p_bad,
                                        chan_rng_[static_cast<size_t>(nd.id)]);

    for (int hid : head_ids_) {
      Node& h = nodes_[static_cast<size_t>(hid)];
      for (int mid : members_[static_cast<size_t>(hid)]) {
        Node& m = nodes_[static_cast<size_t>(mid)];
        if (!m.alive) continue;
        charge(m, tx_cost(cfg_, cfg_.packet_bits, dist(m, h)));
        if (!h.alive) {  // nobody forwards; the member only sees silence
          obs_of(m, hid).log.append(true, false, false);
          continue;
        }
        charge(h, rx_cost(cfg_, cfg_.packet_bits));
        if (observed_link_bad(m, hid)) {
          obs_of(m, hid).log.append(true, false, false);
          continue;
        }
        bool drop = false, tamper = false, delayed = false;
        if (h.tier != Tier::honest && attackers_active()) {
          const double p =
              std::min(1.0, static_cast<double>(static_cast<int>(h.tier)) * cfg_.p_attack);
          Rng& arng = attack_rng_[static_cast<size_t>(hid)];
          if (arng.bernoulli(p)) {
            if (arng.bernoulli(0.5))
              drop = true;
            else
              tamper = true;
            ++row_.attacks_drop;
          }
          if (!drop && arng.bernoulli(p)) {
            delayed = true;
            ++row_.attacks_delay;
          }
        }
        if (!drop) {
          const bool forwarded = h.alive;
          charge(h, tx_cost(cfg_, cfg_.packet_bits, dist_to_sink(h)));
          if (forwarded) {
            charge(m, rx_cost(cfg_, cfg_.packet_bits));  // overhears its forward
            if (m.tier == Tier::honest && !tamper) ++row_.delivered;
          }
        }
        obs_of(m, hid).log.append(drop, delayed, tamper);
      }
      if (h.alive) {
        charge(h, tx_cost(cfg_, cfg_.packet_bits, dist_to_sink(h)));
        if (h.tier == Tier::honest) ++row_.delivered;
      }
    }

    for (Node& nd : nodes_) {
      if (!nd.alive || nd.role != Role::sink_direct) continue;
      charge(nd, tx_cost(cfg_, cfg_.packet_bits, dist_to_sink(nd)));
      if (nd.tier == Tier::honest) ++row_.delivered;
    }

    if (probing()) probe_frame();
  }
}

bool World::probing() const {
  if (!cfg_.trust_enabled || round_ >= cfg_.warmup_rounds) return false;
  // probing any earlier only produces bits the log cap would evict again
  const int cap = 2 * (cfg_.l_w + cfg_.l_w1);
  const int probe_rounds = (cap + cfg_.frames_per_round - 1) / cfg_.frames_per_round;
  return round_ >= cfg_.warmup_rounds - probe_rounds;
}

void World::probe_frame() {
  // one control exchange per alive pair in range; each side logs whether its
  // own channel this frame would have dropped the peer's probe, so warm-up
  // evidence has the same per-frame statistics as membership evidence
  for (Node& a : nodes_) {
    if (!a.alive) continue;
    for (int jid : neighbor_ids_[static_cast<size_t>(a.id)]) {
      if (jid <= a.id) continue;
      Node& b = nodes_[static_cast<size_t>(jid)];
      if (!b.alive) continue;
      const double d = dist(a, b);
      charge(a, tx_cost(cfg_, cfg_.control_bits, d));
      charge(b, rx_cost(cfg_, cfg_.control_bits));
      charge(b, tx_cost(cfg_, cfg_.control_bits, d));
      charge(a, rx_cost(cfg_, cfg_.control_bits));
      const bool a_bad = observed_link_bad(a, jid);
      const bool b_bad = observed_link_bad(b, a.id);
      obs_of(a, jid).log.append(a_bad, false, false);
      obs_of(b, a.id).log.append(b_bad, false, false);
    }
  }
}

void World::finalize_warmup() {
  std::vector<std::vector<double>> dataset;
  for (Node& nd : nodes_) {
    for (int jid : neighbor_ids_[static_cast<size_t>(nd.id)]) {
      auto it = nd.obs.find(jid);
      if (it == nd.obs.end() || it->second.log.size() < min_decision_bits()) continue;
      dataset.push_back(evaluate_trust_series(it->second.log, cfg_.l_w, cfg_.l_w1, fuzzy_));
    }
  }
  data_rng_.shuffle(dataset);
  if (dataset.size() > static_cast<size_t>(cfg_.initial_dataset_cap))
    dataset.resize(static_cast<size_t>(cfg_.initial_dataset_cap));
  if (dataset.size() < static_cast<size_t>(cfg_.manager.codec.batch_size))
    throw DataError("warm-up yielded " + std::to_string(dataset.size()) +
                    " trust vectors; need at least one training batch");

  // every node announces itself to the trust agency once
  for (Node& nd : nodes_)
    if (nd.alive) charge(nd, tx_cost(cfg_, cfg_.control_bits, dist_to_sink(nd)));

  system_->train_initial(dataset);
  if (cfg_.per_node_models) {
    node_systems_.clear();
    for (int i = 0; i < cfg_.nodes; ++i)
      node_systems_.push_back(std::make_unique<TrustSystem>(*system_));
  }
  initial_dataset_ = std::move(dataset);

  // steady-phase evidence starts clean: warm-up bits describe attackers at
  // their best behavior and would dilute fresh observations
  for (Node& nd : nodes_) nd.obs.clear();
  trained_ = true;
}

void World::simulate_round() {
  if (cfg_.trust_enabled && !trained_ && round_ == cfg_.warmup_rounds)
    finalize_warmup();

  row_ = RoundMetrics{};
  row_.round = round_;

  elect_heads();
  form_clusters();
  run_frames();
  if (decisions_enabled()) {
    if (cfg_.per_node_models)
      for (auto& sys : node_systems_) sys->end_round_maintenance();
    else
      system_->end_round_maintenance();
  }

  append_metrics_row();
  ++round_;
}

void World::append_metrics_row() {
  row_.heads = static_cast<int>(head_ids_.size());
  for (const Node& nd : nodes_) {
    if (nd.alive && nd.tier == Tier::honest) ++row_.alive_benign;
    row_.energy_total += std::max(0.0, cfg_.initial_energy - nd.charged);
  }
  result_.rounds.push_back(row_);
}

void World::run() {
  while (round_ < cfg_.rounds) simulate_round();
  if (cfg_.trust_enabled && !trained_ && round_ == cfg_.warmup_rounds)
    finalize_warmup();  // training-only runs end exactly at the warm-up boundary
  finalize_result();
}

void World::finalize_result() {
  result_.summary = summarize_metrics(result_.rounds);
  double sum = 0.0;
  long long count = 0;
  for (const Node& nd : nodes_) {
    for (int jid : neighbor_ids_[static_cast<size_t>(nd.id)]) {
      auto it = nd.obs.find(jid);
      if (it == nd.obs.end() || it->second.first_decision_round < 0) continue;
      sum += it->second.first_decision_round;
      ++count;
    }
  }
  result_.first_decision_pairs = count;
  result_.mean_first_decision_round = count > 0 ? sum / static_cast<double>(count) : 0.0;
}

RunResult run_simulation(const SimConfig& cfg) {
  World w(cfg);
  w.run();
  return w.result();
}

}  // namespace gantrust
