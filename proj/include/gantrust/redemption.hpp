#pragma once

/*
 * Trust redemption for suspected false positives. Per-node evidence is fused
 * (bitwise OR) into a single binary sequence, summarized by sliding-window
 * attack probabilities, and a small GAN learns to restore a masked final
 * probability digit. The restored digit predicts the node's next-step attack
 * probability; its complement is the chance the node cooperates if given
 * another chance.
 */

#include <iosfwd>
#include <vector>

#include "gantrust/errors.hpp"
#include "gantrust/fuzzy.hpp"
#include "gantrust/nn.hpp"
#include "gantrust/rng.hpp"

namespace gantrust {

struct RedemptionConfig {
  int seq_len = 10;    // fused evidence bits considered (matches trust vectors)
  int window = 4;      // sliding window width
  int batch_size = 32;
  int initial_epochs = 300;
  int update_epochs = 50;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double init_stddev = 0.05;

  int vec_dim() const { return seq_len - window + 1; }
};

struct RedemptionModel {
  RedemptionConfig cfg;
  DenseNetwork generator;      // bottleneck net, masked vector -> restored vector
  DenseNetwork discriminator;  // vector -> realness score
  AdamState opt_gen, opt_disc;

  void save(std::ostream& out) const;
  static RedemptionModel load(std::istream& in);
};

struct RedemptionTrainStats {
  double disc_loss = 0.0;
  double gen_loss = 0.0;
};

// windowed ones-fractions over the OR-fusion of the latest seq_len evidence
// bits; one entry per window position, oldest first
std::vector<double> build_attack_vector(const EvidenceLog& log, int seq_len,
                                        int window);

RedemptionModel make_redemption(const RedemptionConfig& cfg, Rng& rng);

// per step: mask the last digit of a real batch with uniform noise, restore
// it with the generator, train the discriminator against a second real
// batch, then train the generator on discriminator feedback plus prefix
// fidelity toward the unmasked digits
RedemptionTrainStats train_redemption(RedemptionModel& model,
                                      const std::vector<std::vector<double>>& dataset,
                                      int epochs, Rng& rng);

// inference kernel: replace the last digit with mask_value, run the
// generator with running statistics, return the restored last digit
double restore_last_digit(const RedemptionModel& model,
                          const std::vector<double>& attack_vec, double mask_value);

// complement of the predicted attack probability for the masked digit
double predict_cooperation(const RedemptionModel& model,
                           const std::vector<double>& attack_vec, Rng& rng);

}  // namespace gantrust
