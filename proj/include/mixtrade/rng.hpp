#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace mixtrade {

// Deterministic 64-bit generator (splitmix64 seeding + xoshiro256**).
// All distribution transforms are written out explicitly so streams are
// reproducible across compilers and standard libraries; std::*_distribution
// is implementation-defined and would break byte-identical reruns.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (no cached spare; keeps the stream
  // position a pure function of the call count).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Standard Gumbel: -log(-log(U)), U in (0, 1).
  double gumbel() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return -std::log(-std::log(u));
  }

  void fill_gumbel(std::span<double> out) {
    for (auto& v : out) v = gumbel();
  }

  // Index sampled from an (unnormalized nonnegative) weight vector.
  int categorical(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    const double u = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  int uniform_int(int n) {  // in [0, n)
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
  }

  // Derive an independent substream for a named role; used to keep e.g.
  // parameter init, action sampling, gumbel noise and shuffling on
  // separate streams so optional components never shift shared draws.
  static uint64_t derive(uint64_t seed, uint64_t role) {
    uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (role + 1));
    return splitmix64(x);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t state_[4];
};

// Role constants for Rng::derive.
namespace rng_role {
inline constexpr uint64_t kInit = 1;      // parameter initialization
inline constexpr uint64_t kAction = 2;    // action sampling during rollouts
inline constexpr uint64_t kGumbel = 3;    // allocation gate noise
inline constexpr uint64_t kShuffle = 4;   // minibatch shuffling
inline constexpr uint64_t kData = 5;      // synthetic data generation
}  // namespace rng_role

}  // namespace mixtrade
