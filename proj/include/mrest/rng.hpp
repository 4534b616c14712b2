#ifndef MREST_RNG_HPP
#define MREST_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>

namespace mrest {

/// SplitMix64 finaliser (Steele, Lea and Flood); used only for seed derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of replication `r` under base seed `base`:
/// splitmix64(splitmix64(base) + r).
constexpr std::uint64_t replication_seed(std::uint64_t base, std::uint64_t r) {
  return splitmix64(splitmix64(base) + r);
}

/// Generator "mrest-rng v1": std::mt19937_64 (whose output sequence is fixed by
/// the C++ standard) with library-defined transforms, so draws are identical
/// across standard library implementations.
///
///  - uniform():  top 53 bits of one engine output, scaled to [0, 1).
///  - normal():   Box-Muller on (1 - uniform(), uniform()); the cosine branch is
///                returned first and the sine branch cached for the next call.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace mrest

#endif  // MREST_RNG_HPP
