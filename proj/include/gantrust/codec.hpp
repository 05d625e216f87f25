#pragma once

/*
 * Adversarial codec for trust classification. An encoder/decoder generator
 * pair is trained against two least-squares discriminators so that benign
 * trust vectors reconstruct well; the reconstruction loss of a fresh vector
 * then scores how much it deviates from learned benign behavior. Two
 * percentile-style thresholds over the training losses split scores into
 * trusted / suspect / malicious.
 */

#include <iosfwd>
#include <vector>

#include "gantrust/errors.hpp"
#include "gantrust/nn.hpp"
#include "gantrust/rng.hpp"

namespace gantrust {

struct CodecConfig {
  int data_dim = 10;    // trust vector length
  int latent_dim = 10;  // encoder output size
  int batch_size = 32;
  int initial_epochs = 500;
  int update_epochs = 50;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double init_stddev = 0.05;
  // generator hidden widths, outermost to innermost (four layers total)
  int gen_h1 = 32;
  int gen_h2 = 32;
  int gen_h3 = 16;

  int condition_dim() const { return data_dim - 1; }
};

struct CodecModel {
  CodecConfig cfg;
  DenseNetwork encoder;    // data_dim -> latent_dim, tanh final
  DenseNetwork decoder;    // latent_dim + condition -> data_dim, sigmoid final
  DenseNetwork d_latent;   // latent_dim -> 1, sigmoid
  DenseNetwork d_sample;   // data_dim + condition -> 1, sigmoid
  AdamState opt_encoder, opt_decoder, opt_d_latent, opt_d_sample;

  void save(std::ostream& out) const;
  static CodecModel load(std::istream& in);
};

// losses of the last training step, mainly for tests and logging
struct CodecTrainStats {
  double d_latent_loss = 0.0;
  double d_sample_loss = 0.0;
  double encoder_loss = 0.0;
  double decoder_loss = 0.0;
};

// fresh networks with gaussian-initialized weights; draw order is fixed
// (encoder, decoder, latent discriminator, sample discriminator)
CodecModel make_codec(const CodecConfig& cfg, Rng& rng);

// first differences of a trust vector; captures how trust changed
std::vector<double> condition_of(const std::vector<double>& x);

// adversarial training over the dataset for the given number of epochs.
// Each epoch shuffles the dataset and walks full batches; each step draws
// one condition batch from randomly selected dataset vectors plus one
// uniform latent batch, then updates latent discriminator, sample
// discriminator, encoder, and decoder in that order.
CodecTrainStats train_codec(CodecModel& model,
                            const std::vector<std::vector<double>>& dataset,
                            int epochs, Rng& rng);

// mean absolute difference between x and its reconstruction, computed with
// running normalization statistics (no training side effects)
double reconstruction_loss(const CodecModel& model, const std::vector<double>& x);

struct ThresholdPair {
  double tr1 = 0.0;
  double tr2 = 0.0;
};

// Tr2 = max loss; Tr1 = max after discarding the floor(0.1*N) largest
ThresholdPair thresholds_from_losses(std::vector<double> losses);
ThresholdPair compute_thresholds(const CodecModel& model,
                                 const std::vector<std::vector<double>>& dataset);

enum class TrustClass { trusted, suspect, malicious };

TrustClass classify_loss(double loss, const ThresholdPair& t);
TrustClass classify(const CodecModel& model, const ThresholdPair& t,
                    const std::vector<double>& x);

}  // namespace gantrust
