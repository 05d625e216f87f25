#include "gantrust/fuzzy.hpp"

#include <algorithm>
#include <string>

namespace gantrust {

namespace {

// consequent singletons, row = loss-rate level (low/med/high),
// column = delay-rate level
constexpr double kConsequents[3][3] = {
    {1.0, 0.9, 0.7},
    {0.7, 0.5, 0.3},
    {0.3, 0.1, 0.0},
};

double low_upper(double x) {
  if (x <= 0.1) return 1.0;
  if (x >= 0.5) return 0.0;
  return (0.5 - x) / 0.4;
}

double medium_upper(double x) {
  if (x <= 0.1 || x >= 0.9) return 0.0;
  if (x <= 0.5) return (x - 0.1) / 0.4;
  return (0.9 - x) / 0.4;
}

double high_upper(double x) {
  if (x <= 0.5) return 0.0;
  if (x >= 0.9) return 1.0;
  return (x - 0.5) / 0.4;
}

void check_unit(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0))
    throw DomainError(std::string(what) + " outside [0,1]: " + std::to_string(x));
}

}  // namespace

MembershipTriple membership_degrees(double x, double lower_scale) {
  check_unit(x, "membership input");
  if (!(lower_scale >= 0.0 && lower_scale <= 1.0))
    throw DomainError("lower_scale outside [0,1]: " + std::to_string(lower_scale));
  MembershipTriple t;
  t.low.upper = low_upper(x);
  t.medium.upper = medium_upper(x);
  t.high.upper = high_upper(x);
  t.low.lower = lower_scale * t.low.upper;
  t.medium.lower = lower_scale * t.medium.upper;
  t.high.lower = lower_scale * t.high.upper;
  return t;
}

double infer_trust(const AttributePair& p, const FuzzyConfig& cfg) {
  check_unit(p.loss_rate, "loss_rate");
  check_unit(p.delay_rate, "delay_rate");

  const MembershipTriple m1 = membership_degrees(p.loss_rate, cfg.lower_scale);
  const MembershipTriple m2 = membership_degrees(p.delay_rate, cfg.lower_scale);
  const MembershipPair a1[3] = {m1.low, m1.medium, m1.high};
  const MembershipPair a2[3] = {m2.low, m2.medium, m2.high};

  double sum_fl = 0.0, sum_fl_y = 0.0;
  double sum_fu = 0.0, sum_fu_y = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double fl = a1[i].lower * a2[j].lower;  // product t-norm
      const double fu = a1[i].upper * a2[j].upper;
      sum_fl += fl;
      sum_fl_y += fl * kConsequents[i][j];
      sum_fu += fu;
      sum_fu_y += fu * kConsequents[i][j];
    }
  }
  // the sets cover [0,1], so at least one upper firing is always positive
  const double upper_term = sum_fu_y / sum_fu;
  // lower firings can vanish (lower_scale == 0); fall back to the upper term
  const double lower_term = sum_fl > 0.0 ? sum_fl_y / sum_fl : upper_term;
  return cfg.alpha * lower_term + cfg.beta * upper_term;
}

EvidenceLog::EvidenceLog(int max_len) : max_len_(max_len) {
  if (max_len < 1) throw DomainError("EvidenceLog max_len must be >= 1");
  bits_.reserve(static_cast<size_t>(max_len));
}

void EvidenceLog::append(bool drop, bool delay, bool tamper) {
  if (size() == max_len_) bits_.erase(bits_.begin());
  bits_.push_back(Bits{drop, delay, tamper});
}

void EvidenceLog::clear() { bits_.clear(); }

std::vector<AttributePair> compute_attribute_pairs(const EvidenceLog& log, int l_w) {
  if (l_w < 1) throw DomainError("window length must be >= 1");
  if (log.size() < l_w)
    throw EvidenceError("need " + std::to_string(l_w) + " observations, have " +
                        std::to_string(log.size()));
  std::vector<AttributePair> pairs;
  pairs.reserve(static_cast<size_t>(log.size() - l_w + 1));
  for (int s = 0; s + l_w <= log.size(); ++s) {
    int lost = 0, delayed = 0;
    for (int i = s; i < s + l_w; ++i) {
      if (log.drop(i) || log.tamper(i)) ++lost;
      if (log.delay(i)) ++delayed;
    }
    pairs.push_back(AttributePair{static_cast<double>(lost) / l_w,
                                  static_cast<double>(delayed) / l_w});
  }
  return pairs;
}

std::vector<double> evaluate_trust_series(const EvidenceLog& log, int l_w, int l_w1,
                                          const FuzzyConfig& cfg) {
  if (l_w1 < 1) throw DomainError("series length must be >= 1");
  const int need = l_w + l_w1 - 1;
  if (log.size() < need)
    throw EvidenceError("need " + std::to_string(need) + " observations, have " +
                        std::to_string(log.size()));
  const std::vector<AttributePair> pairs = compute_attribute_pairs(log, l_w);
  std::vector<double> series;
  series.reserve(static_cast<size_t>(l_w1));
  for (size_t k = pairs.size() - static_cast<size_t>(l_w1); k < pairs.size(); ++k)
    series.push_back(infer_trust(pairs[k], cfg));
  return series;
}

}  // namespace gantrust
