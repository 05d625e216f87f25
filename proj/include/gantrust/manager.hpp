#pragma once

/*
 * Decision engine tying the pieces together. A TrustSystem owns the codec
 * classifier, its thresholds, the redemption model, and the two update
 * buffers. Deciders feed it a neighbor's trust vector (and attack vector)
 * plus a recommendation count; it returns a label and maintains the
 * buffers that drive periodic retraining.
 */

#include <cstdint>
#include <deque>
#include <vector>

#include "gantrust/codec.hpp"
#include "gantrust/errors.hpp"
#include "gantrust/redemption.hpp"
#include "gantrust/rng.hpp"

namespace gantrust {

struct ManagerConfig {
  CodecConfig codec;
  RedemptionConfig redemption;
  double admit_factor = 0.6;  // classifier buffer admits loss < admit_factor * Tr1
  int min_recommendations = 3;
  int update_batches = 5;             // retrain once a buffer holds this many batches
  int redemption_initial_batches = 10;  // first redemption training needs more data
  int buffer_cap_batches = 10;        // FIFO bound on both buffers
};

enum class TrustLabel { trusted, redemption_trusted, untrusted };

struct TrustDecision {
  TrustLabel label = TrustLabel::untrusted;
  TrustClass cls = TrustClass::malicious;  // raw classifier verdict
  double loss = 0.0;
  double cooperation = -1.0;  // set only when redemption was consulted
  int recommendations = 0;
};

class TrustSystem {
 public:
  TrustSystem(ManagerConfig cfg, uint64_t seed);

  // initial codec training on warm-up trust vectors + threshold computation;
  // the dataset is retained as the threshold reference for later updates
  void train_initial(const std::vector<std::vector<double>>& dataset);

  // test seam: install pre-built models instead of training
  void adopt_classifier(CodecModel model, ThresholdPair thresholds);
  void adopt_redemption(RedemptionModel model);
  void set_threshold_reference(std::vector<std::vector<double>> dataset);

  bool classifier_ready() const { return classifier_ready_; }
  bool redemption_ready() const { return redemption_ready_; }
  const ThresholdPair& thresholds() const { return thresholds_; }
  const CodecModel& classifier() const { return codec_; }
  const RedemptionModel& redemption() const { return redemption_; }
  size_t classifier_buffer_size() const { return classifier_buffer_.size(); }
  size_t redemption_buffer_size() const { return redemption_buffer_.size(); }

  // classify and label one neighbor; draws (redemption gate) come from the
  // caller's stream so per-node decisions stay reproducible
  TrustDecision decide(const std::vector<double>& trust_vector,
                       const std::vector<double>& attack_vector,
                       int recommendations, Rng& rng);

  // retraining triggers: codec update + threshold refresh at five batches of
  // admitted vectors; redemption initial training at ten batches of attack
  // vectors, updates at five
  void end_round_maintenance();

 private:
  void push_bounded(std::deque<std::vector<double>>& buf, std::vector<double> v);

  ManagerConfig cfg_;
  CodecModel codec_;
  RedemptionModel redemption_;
  ThresholdPair thresholds_;
  std::vector<std::vector<double>> threshold_reference_;
  bool classifier_ready_ = false;
  bool redemption_ready_ = false;
  std::deque<std::vector<double>> classifier_buffer_;
  std::deque<std::vector<double>> redemption_buffer_;
  Rng train_rng_;
  Rng redemption_rng_;
};

}  // namespace gantrust
