#include "gantrust/manager.hpp"

#include <algorithm>
#include <utility>

namespace gantrust {

namespace {
constexpr uint64_t kCodecStream = 0xc0;
constexpr uint64_t kRedemptionStream = 0x4e;
constexpr uint64_t kInitStream = 0x11;
}  // namespace

TrustSystem::TrustSystem(ManagerConfig cfg, uint64_t seed)
    : cfg_(cfg),
      codec_([&] {
        Rng r = derive_stream(seed, kInitStream, 0);
        return make_codec(cfg.codec, r);
      }()),
      redemption_([&] {
        Rng r = derive_stream(seed, kInitStream, 1);
        return make_redemption(cfg.redemption, r);
      }()),
      train_rng_(derive_stream(seed, kCodecStream, 0)),
      redemption_rng_(derive_stream(seed, kRedemptionStream, 0)) {
  if (cfg_.admit_factor <= 0.0 || cfg_.admit_factor > 1.0)
    throw DomainError("admit_factor must sit in (0,1]");
  if (cfg_.min_recommendations < 0 || cfg_.update_batches < 1 ||
      cfg_.redemption_initial_batches < 1 || cfg_.buffer_cap_batches < 1)
    throw DomainError("manager thresholds must be positive");
}

void TrustSystem::train_initial(const std::vector<std::vector<double>>& dataset) {
  train_codec(codec_, dataset, cfg_.codec.initial_epochs, train_rng_);
  thresholds_ = compute_thresholds(codec_, dataset);
  threshold_reference_ = dataset;
  classifier_ready_ = true;
}

void TrustSystem::adopt_classifier(CodecModel model, ThresholdPair thresholds) {
  if (thresholds.tr1 > thresholds.tr2) throw DomainError("thresholds out of order");
  codec_ = std::move(model);
  thresholds_ = thresholds;
  classifier_ready_ = true;
}

void TrustSystem::adopt_redemption(RedemptionModel model) {
  redemption_ = std::move(model);
  redemption_ready_ = true;
}

void TrustSystem::set_threshold_reference(
    std::vector<std::vector<double>> dataset) {
  threshold_reference_ = std::move(dataset);
}

void TrustSystem::push_bounded(std::deque<std::vector<double>>& buf,
                               std::vector<double> v) {
  const size_t cap = static_cast<size_t>(cfg_.buffer_cap_batches) *
                     static_cast<size_t>(cfg_.codec.batch_size);
  if (buf.size() == cap) buf.pop_front();
  buf.push_back(std::move(v));
}

TrustDecision TrustSystem::decide(const std::vector<double>& trust_vector,
                                  const std::vector<double>& attack_vector,
                                  int recommendations, Rng& rng) {
  if (!classifier_ready_) throw StateError("classifier not trained yet");

  TrustDecision d;
  d.recommendations = recommendations;
  d.loss = reconstruction_loss(codec_, trust_vector);
  d.cls = classify_loss(d.loss, thresholds_);

  switch (d.cls) {
    case TrustClass::trusted:
      d.label = TrustLabel::trusted;
      if (d.loss < cfg_.admit_factor * thresholds_.tr1)
        push_bounded(classifier_buffer_, trust_vector);
      break;
    case TrustClass::suspect:
      if (recommendations >= cfg_.min_recommendations) {
        // before the redemption model exists, read the freshest attack
        // probability directly
        d.cooperation = redemption_ready_
                            ? predict_cooperation(redemption_, attack_vector, rng)
                            : 1.0 - attack_vector.back();
        d.label = rng.bernoulli(d.cooperation) ? TrustLabel::redemption_trusted
                                               : TrustLabel::untrusted;
      } else {
        d.label = TrustLabel::untrusted;
      }
      break;
    case TrustClass::malicious:
      d.label = TrustLabel::untrusted;
      push_bounded(redemption_buffer_, attack_vector);
      break;
  }
  return d;
}

void TrustSystem::end_round_maintenance() {
  const size_t update_at = static_cast<size_t>(cfg_.update_batches) *
                           static_cast<size_t>(cfg_.codec.batch_size);
  if (classifier_ready_ && classifier_buffer_.size() >= update_at) {
    std::vector<std::vector<double>> data(classifier_buffer_.begin(),
                                          classifier_buffer_.end());
    // The buffer only admits vectors scoring below admit_factor * tr1, i.e.
    // the easy end of the benign distribution. Retraining on it alone makes
    // the codec forget the benign tails (reference losses roughly double),
    // so pad the update set with an equal-sized draw from the reference.
    if (!threshold_reference_.empty()) {
      std::vector<size_t> idx(threshold_reference_.size());
      for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      train_rng_.shuffle(idx);
      const size_t take = std::min(data.size(), idx.size());
      for (size_t i = 0; i < take; ++i)
        data.push_back(threshold_reference_[idx[i]]);
    }
    train_codec(codec_, data, cfg_.codec.update_epochs, train_rng_);
    // Thresholds come from the retained reference set, not the update buffer:
    // the buffer's admission bias would shrink tr1 by admit_factor on every
    // retrain until everything benign lands in the suspect band.
    thresholds_ = compute_thresholds(
        codec_, threshold_reference_.empty() ? data : threshold_reference_);
    classifier_buffer_.clear();
  }

  const size_t redemption_at =
      static_cast<size_t>(redemption_ready_ ? cfg_.update_batches
                                            : cfg_.redemption_initial_batches) *
      static_cast<size_t>(cfg_.redemption.batch_size);
  if (redemption_buffer_.size() >= redemption_at) {
    std::vector<std::vector<double>> data(redemption_buffer_.begin(),
                                          redemption_buffer_.end());
    train_redemption(redemption_, data,
                     redemption_ready_ ? cfg_.redemption.update_epochs
                                       : cfg_.redemption.initial_epochs,
                     redemption_rng_);
    redemption_ready_ = true;
    redemption_buffer_.clear();
  }
}

}  // namespace gantrust
