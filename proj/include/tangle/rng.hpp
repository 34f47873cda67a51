#pragma once

#include <cstdint>

namespace tangle {

// xoshiro256++ with splitmix64 seeding. Self-contained so that streams are
// reproducible bit for bit regardless of platform or standard library.
// Every consumer (replica, exchange scheduler, sweep orchestrator) owns its
// own stream, derived from (seed, stream id).
class Rng {
 public:
  explicit Rng(uint64_t seed) { reseed(seed); }
  Rng(uint64_t seed, uint64_t stream) { reseed(mix(seed, stream)); }

  void reseed(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1).
  double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal (Marsaglia polar method, pairs cached).
  double normal();

  // Uniform integer in [0, n), n >= 1.
  int below(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(n)) >> 64);
  }

  // Stream/seed derivation hash (splitmix64 over both words).
  static uint64_t mix(uint64_t a, uint64_t b);

 private:
  uint64_t s_[4]{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

} // namespace tangle
