#pragma once

/*
 * Trust-value estimation from behavior evidence. Three binary sequences per
 * observed neighbor (drop, delay, tamper) feed sliding windows that yield
 * (packet-loss rate, delay rate) attribute pairs; an interval type-2 TSK
 * rule base turns each pair into a scalar trust value in [0,1].
 */

#include <vector>

#include "gantrust/errors.hpp"

namespace gantrust {

struct FuzzyConfig {
  double alpha = 0.5;        // weight of the lower-bound average
  double beta = 0.5;         // weight of the upper-bound average
  double lower_scale = 0.8;  // lower membership = lower_scale * upper membership
};

struct MembershipPair {
  double lower = 0.0;
  double upper = 0.0;
};

struct MembershipTriple {
  MembershipPair low, medium, high;
};

// piecewise-linear sets on [0,1]: low plateaus at 1 on [0,0.1] and reaches 0
// at 0.5; medium is the 0.1/0.5/0.9 triangle; high mirrors low from 0.5 up
MembershipTriple membership_degrees(double x, double lower_scale);

struct AttributePair {
  double loss_rate = 0.0;   // dropped-or-tampered fraction of the window
  double delay_rate = 0.0;  // delayed fraction of the window
};

// weighted bound-mixing defuzzification over the 9-rule base
double infer_trust(const AttributePair& p, const FuzzyConfig& cfg);

// bounded per-neighbor history of (drop, delay, tamper) observations,
// oldest first; appending past max_len discards the oldest entry
class EvidenceLog {
 public:
  explicit EvidenceLog(int max_len);

  void append(bool drop, bool delay, bool tamper);
  void clear();

  int size() const { return static_cast<int>(bits_.size()); }
  int max_len() const { return max_len_; }

  bool drop(int i) const { return bits_[i].drop; }
  bool delay(int i) const { return bits_[i].delay; }
  bool tamper(int i) const { return bits_[i].tamper; }

 private:
  struct Bits {
    bool drop, delay, tamper;
  };
  std::vector<Bits> bits_;  // small enough that erase-front stays cheap
  int max_len_;
};

// one attribute pair per window position, oldest first; requires size >= l_w
std::vector<AttributePair> compute_attribute_pairs(const EvidenceLog& log, int l_w);

// trust values for the latest l_w1 window positions, oldest first;
// requires size >= l_w + l_w1 - 1
std::vector<double> evaluate_trust_series(const EvidenceLog& log, int l_w, int l_w1,
                                          const FuzzyConfig& cfg);

}  // namespace gantrust
