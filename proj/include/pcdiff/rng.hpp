#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace pcdiff {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Mix an arbitrary list of stream identifiers into one seed.
inline uint64_t mix_seed(uint64_t seed) { return splitmix64(seed); }
template <class... Rest>
inline uint64_t mix_seed(uint64_t seed, uint64_t next, Rest... rest) {
  return mix_seed(splitmix64(seed ^ (next + 0x9e3779b97f4a7c15ULL)), rest...);
}

// xoshiro256++ with explicit, serializable state. All randomness in the
// project goes through this type so runs are reproducible bit-for-bit
// across compilers (std:: distributions are implementation-defined).
class Rng {
 public:
  Rng() : Rng(0x853c49e6748fea9bULL) {}
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : state_) w = x = splitmix64(x + 0x9e3779b97f4a7c15ULL);
  }

  uint64_t next_u64() {
    auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller. Stateless between calls (the spare
  // draw is discarded) so serialization is just the four state words.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

 private:
  std::array<uint64_t, 4> state_;
};

}  // namespace pcdiff
