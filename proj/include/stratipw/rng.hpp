#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

namespace stratipw {

// All randomness in the library flows through Rng: a std::mt19937_64 engine
// (bit-stable across standard library implementations) combined with explicit
// variate transforms, because the distribution adaptors in <random> are
// implementation-defined. Substreams are derived with splitmix64 so that
// per-cell / per-resample generation is order-independent.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  return splitmix64(state);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix_seed(seed, stream));
  }

  /// Uniform on [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0,1]; safe as a log() argument.
  double uniform_pos() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  /// Box-Muller transform; consumes exactly two engine draws per variate.
  double normal(double mean, double sd) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  /// Uniform integer in [0, n) via 128-bit multiply-shift.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(n)) >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace stratipw
