#pragma once

#include <cstdint>
#include <random>

namespace gantrust {

// splitmix64 finalizer; used to spread seeds and derive independent streams
uint64_t mix64(uint64_t x);

/*
 * Deterministic RNG wrapper. All distribution math lives here instead of
 * <random>'s distribution classes so that a given seed reproduces the same
 * sequence on every standard library. Every stochastic component of the
 * simulator draws from its own Rng stream derived from the master seed, so
 * evaluation order between components cannot change results.
 */
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(mix64(seed ^ 0x42f0e1eba9ea3693ull)) {}

  uint64_t next_u64() { return eng_(); }

  // [0,1) with 53 random bits
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // [0,n) unbiased via rejection
  uint64_t uniform_int(uint64_t n);

  // Box-Muller with cached spare
  double normal(double mean, double stddev);

  bool bernoulli(double p) { return uniform01() < p; }

  // in-place Fisher-Yates, stable across platforms
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Named sub-stream of a master seed. Tag picks the component, index the
// instance (node id, run number, ...).
Rng derive_stream(uint64_t master_seed, uint64_t tag, uint64_t index);

}  // namespace gantrust
