#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gantrust/manager.hpp"

using namespace gantrust;

namespace {

// codec with all-zero weights reconstructs everything to 0.5, so the loss of
// a constant vector [v]*10 is exactly |v - 0.5|
TrustSystem crafted_system(ThresholdPair thr, double coop_bias = 0.0,
                           bool with_redemption = false) {
  ManagerConfig cfg;
  cfg.codec.init_stddev = 0.0;
  cfg.redemption.init_stddev = 0.0;
  TrustSystem sys(cfg, 1234);
  Rng r(1);
  sys.adopt_classifier(make_codec(cfg.codec, r), thr);
  if (with_redemption) {
    RedemptionModel rm = make_redemption(cfg.redemption, r);
    auto params = rm.generator.flat_params();
    params[params.size() - 1] = coop_bias;  // last output digit = sigmoid(bias)
    rm.generator.set_flat_params(params);
    sys.adopt_redemption(std::move(rm));
  }
  return sys;
}

std::vector<double> constant_vec(double v, int n = 10) {
  return std::vector<double>(static_cast<size_t>(n), v);
}

}  // namespace

TEST_CASE("trusted classification passes through and feeds the buffer") {
  auto sys = crafted_system({0.1, 0.2});
  Rng rng(7);
  auto attack = constant_vec(0.0, 7);

  auto d = sys.decide(constant_vec(0.45), attack, 0, rng);
  CHECK(d.label == TrustLabel::trusted);
  CHECK(d.cls == TrustClass::trusted);
  CHECK(d.loss == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(d.cooperation == -1.0);
  CHECK(sys.classifier_buffer_size() == 1);  // 0.05 < 0.6 * 0.1

  // trusted but above the admission bar: buffer unchanged
  auto d2 = sys.decide(constant_vec(0.42), attack, 0, rng);
  CHECK(d2.label == TrustLabel::trusted);
  CHECK(d2.loss == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(sys.classifier_buffer_size() == 1);
}

TEST_CASE("suspects need three recommendations before redemption") {
  auto sys = crafted_system({0.1, 0.2}, -40.0, true);  // sigmoid(-40) ~ 0
  Rng rng(8);
  auto suspect = constant_vec(0.35);  // loss 0.15
  auto attack = constant_vec(0.25, 7);

  auto refused = sys.decide(suspect, attack, 2, rng);
  CHECK(refused.label == TrustLabel::untrusted);
  CHECK(refused.cls == TrustClass::suspect);
  CHECK(refused.cooperation == -1.0);

  for (int i = 0; i < 10; ++i) {
    auto d = sys.decide(suspect, attack, 3, rng);
    CHECK(d.label == TrustLabel::redemption_trusted);  // cooperation ~ 1
    CHECK(d.cooperation == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(sys.redemption_buffer_size() == 0);  // suspects never feed buffers
}

TEST_CASE("cooperation fallback reads the latest attack probability") {
  auto sys = crafted_system({0.1, 0.2});  // no redemption model yet
  Rng rng(9);
  std::vector<double> attack = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.25};
  auto d = sys.decide(constant_vec(0.35), attack, 3, rng);
  CHECK(d.cooperation == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("redemption gate frequency follows the predicted cooperation") {
  const double bias = std::log(0.3 / 0.7);  // digit 0.3, cooperation 0.7
  auto sys = crafted_system({0.1, 0.2}, bias, true);
  Rng rng(10);
  auto suspect = constant_vec(0.35);
  auto attack = constant_vec(0.25, 7);
  int granted = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    auto d = sys.decide(suspect, attack, 3, rng);
    CHECK(d.cooperation == doctest::Approx(0.7).epsilon(1e-9));
    if (d.label == TrustLabel::redemption_trusted) ++granted;
  }
  const double freq = static_cast<double>(granted) / trials;
  MESSAGE("redemption grant frequency: ", freq);
  CHECK(std::fabs(freq - 0.7) < 0.05);
}

TEST_CASE("malicious classification feeds the redemption buffer") {
  auto sys = crafted_system({0.1, 0.2});
  Rng rng(11);
  auto attack = constant_vec(0.75, 7);
  auto d = sys.decide(constant_vec(0.25), attack, 5, rng);
  CHECK(d.label == TrustLabel::untrusted);
  CHECK(d.cls == TrustClass::malicious);
  CHECK(d.cooperation == -1.0);
  CHECK(sys.redemption_buffer_size() == 1);
}

TEST_CASE("buffers are bounded FIFO") {
  auto sys = crafted_system({1.0, 1.0});  // everything admits (loss < 0.6)
  Rng rng(12);
  auto attack = constant_vec(0.0, 7);
  for (int i = 0; i < 321; ++i) {
    sys.decide(constant_vec(0.45), attack, 0, rng);
    // drain nothing: maintenance not called
  }
  CHECK(sys.classifier_buffer_size() == 320);
}

TEST_CASE("classifier retrains and recomputes thresholds at five batches") {
  ManagerConfig cfg;
  TrustSystem sys(cfg, 99);
  Rng init(1);
  // start from a lightly trained real codec so retraining moves parameters
  CodecModel m = make_codec(cfg.codec, init);
  sys.adopt_classifier(std::move(m), ThresholdPair{10.0, 10.0});  // admit all

  Rng rng(13);
  Rng noise(14);
  for (int i = 0; i < 159; ++i) {
    std::vector<double> v(10);
    for (double& x : v) x = 0.9 + noise.uniform(-0.05, 0.05);
    sys.decide(v, constant_vec(0.0, 7), 0, rng);
  }
  CHECK(sys.classifier_buffer_size() == 159);
  sys.end_round_maintenance();
  CHECK(sys.classifier_buffer_size() == 159);  // below the trigger
  CHECK(sys.thresholds().tr1 == 10.0);

  std::vector<double> one(10, 0.9);
  sys.decide(one, constant_vec(0.0, 7), 0, rng);
  CHECK(sys.classifier_buffer_size() == 160);
  sys.end_round_maintenance();
  CHECK(sys.classifier_buffer_size() == 0);
  CHECK(sys.thresholds().tr1 <= sys.thresholds().tr2);
  CHECK(sys.thresholds().tr2 < 10.0);  // recomputed from real losses
}

TEST_CASE("threshold recompute is anchored to the retained reference set") {
  ManagerConfig cfg;
  TrustSystem sys(cfg, 99);
  Rng init(1);
  sys.adopt_classifier(make_codec(cfg.codec, init), ThresholdPair{10.0, 10.0});

  // wide spread of losses, unlike the tightly filtered update buffer
  Rng noise(21);
  std::vector<std::vector<double>> reference;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(10);
    for (double& x : v) x = noise.uniform01();
    reference.push_back(v);
  }
  sys.set_threshold_reference(reference);

  Rng rng(13);
  std::vector<std::vector<double>> buffered;
  for (int i = 0; i < 160; ++i) {
    std::vector<double> v(10);
    for (double& x : v) x = 0.9 + noise.uniform(-0.02, 0.02);
    buffered.push_back(v);
    sys.decide(v, constant_vec(0.0, 7), 0, rng);
  }
  CHECK(sys.classifier_buffer_size() == 160);
  sys.end_round_maintenance();
  CHECK(sys.classifier_buffer_size() == 0);

  auto from_ref = compute_thresholds(sys.classifier(), reference);
  auto from_buf = compute_thresholds(sys.classifier(), buffered);
  CHECK(sys.thresholds().tr1 == from_ref.tr1);
  CHECK(sys.thresholds().tr2 == from_ref.tr2);
  CHECK(sys.thresholds().tr2 != from_buf.tr2);
}

TEST_CASE("redemption trains initially at ten batches then updates at five") {
  ManagerConfig cfg;
  cfg.redemption.initial_epochs = 30;  // keep the test quick
  cfg.redemption.update_epochs = 5;
  TrustSystem sys(cfg, 77);
  Rng init(2);
  CodecConfig cc;
  cc.init_stddev = 0.0;
  sys.adopt_classifier(make_codec(cc, init), ThresholdPair{0.1, 0.2});

  Rng rng(15);
  auto malicious_vec = constant_vec(0.25);  // loss 0.25 -> malicious
  Rng noise(16);
  auto attack_of = [&] {
    std::vector<double> a(7);
    for (double& x : a) x = noise.uniform_int(5) / 4.0;
    return a;
  };
  for (int i = 0; i < 319; ++i) sys.decide(malicious_vec, attack_of(), 0, rng);
  sys.end_round_maintenance();
  CHECK_FALSE(sys.redemption_ready());
  CHECK(sys.redemption_buffer_size() == 319);

  sys.decide(malicious_vec, attack_of(), 0, rng);
  sys.end_round_maintenance();
  CHECK(sys.redemption_ready());
  CHECK(sys.redemption_buffer_size() == 0);

  for (int i = 0; i < 160; ++i) sys.decide(malicious_vec, attack_of(), 0, rng);
  const auto before = sys.redemption().generator.flat_params();
  sys.end_round_maintenance();
  CHECK(sys.redemption_buffer_size() == 0);
  CHECK(sys.redemption().generator.flat_params() != before);
}

TEST_CASE("decide requires a trained classifier") {
  ManagerConfig cfg;
  TrustSystem sys(cfg, 5);
  Rng rng(17);
  CHECK_THROWS_AS(sys.decide(constant_vec(0.5), constant_vec(0.0, 7), 0, rng),
                  StateError);
}
