#ifndef BCFP_RANDOM_H_
#define BCFP_RANDOM_H_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace bcfp {

// Derives an independent seed for a named consumer ("split", "embed", ...)
// so one top-level seed controls every stage.
uint64_t DeriveSeed(uint64_t base, std::string_view label);

// Stateless 64-bit mixer (splitmix64 finalizer).
uint64_t Mix64(uint64_t x);

// Thin wrapper over mt19937_64 with distribution helpers whose output does not
// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t Next() { return engine_(); }

  // Uniform in [0, 1).
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). n must be positive.
  uint64_t Below(uint64_t n);

  // Standard normal via Box-Muller.
  double Normal();

  double LogNormal(double mu, double sigma) {
    return std::exp(mu + sigma * Normal());
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[Below(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Counter-based uniform in [0, 1): same (seed, counter) always gives the same
// value. Used where draws must not depend on evaluation order.
double HashUniform(uint64_t seed, uint64_t counter);

}  // namespace bcfp

#endif  // BCFP_RANDOM_H_
