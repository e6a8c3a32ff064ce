#ifndef UNISIM_RNG_HPP
#define UNISIM_RNG_HPP

#include <cmath>
#include <cstdint>

namespace unisim {

// Counter-based generator: every draw is a pure function of
// (seed, worker, round, purpose, counter), so parallel and serial
// execution over workers/rounds see identical streams.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t worker = 0, uint64_t round = 0,
               uint64_t purpose = 0)
      : key_(mix(mix(mix(seed ^ 0x9e3779b97f4a7c15ULL, worker), round),
                 purpose)),
        ctr_(0) {}

  uint64_t next_u64() { return mix(key_, ++ctr_); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller (two uniforms per draw, no cached state)
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

  // uniform integer in [0, n); modulo bias is negligible for n << 2^64
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }
  uint64_t key_;
  uint64_t ctr_;
};

}  // namespace unisim

#endif
