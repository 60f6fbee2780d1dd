#ifndef SDA_RNG_HPP
#define SDA_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "sda/common.hpp"

namespace sda {

// All randomness in the library flows through this generator. The engine is
// std::mt19937_64 (bit-exact per the C++ standard) and every distribution is
// implemented here explicitly, because the std:: distribution algorithms are
// implementation-defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1); never returns an exact 0 or 1.
  double uniform_pos() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the trigonometric Box-Muller transform. Consumes
  // exactly two engine draws per call; the sine branch is discarded so the
  // draw count per call is fixed.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double exponential() { return -std::log(uniform_pos()); }

  // Poisson draw. Knuth multiplication below mean 30, Hormann's PTRD
  // transformed rejection above; both are deterministic given the stream.
  long poisson(double mean);

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection to avoid modulo bias.
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 gen_;
};

// Derives an independent stream seed from (master seed, component tag, index).
// FNV-1a over the tag and index mixed with the master, then a splitmix64
// finalizer. Stable across platforms and releases.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
  std::uint64_t h = fnv1a(tag);
  h = fnv1a(&index, sizeof(index), h);
  h = fnv1a(&master, sizeof(master), h);
  // splitmix64 finalizer
  h += 0x9E3779B97f4A7C15ULL;
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
  return h ^ (h >> 31);
}

}  // namespace sda

#endif  // SDA_RNG_HPP
