#pragma once

// Deterministic random source used everywhere in the library.
//
// std::mt19937_64 supplies the raw bits, but all conversions to doubles,
// bounded integers and normal deviates are implemented here instead of
// relying on std:: distributions, whose algorithms are implementation
// defined.  Two builds against different standard libraries therefore
// produce identical streams for the same seed.

#include <cmath>
#include <cstdint>
#include <random>

namespace fairdolce {

// Cheap integer hash, used to derive independent sub-seeds from one base
// seed (e.g. one stream for parameter init, another for batch sampling).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform01() {
    return static_cast<double>(bits() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Uniform integer in {0, ..., n-1}.  Multiply-shift; the bias is below
  // n / 2^64 which is far below anything our statistical tests resolve.
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(bits()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller; caches the second deviate of the pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fairdolce
