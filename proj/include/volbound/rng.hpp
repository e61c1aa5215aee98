#pragma once

#include <cstdint>
#include <random>

namespace volbound {

// Deterministic stream keyed by (seed, index). Streams are seeded through
// splitmix64 so nearby indices give decorrelated Mersenne-Twister states.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t index);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next_u64() { return engine_(); }

  // Child stream for nested (inner) simulations, keyed by the parent key.
  RngStream child(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

RngStream rng_substream(std::uint64_t seed, std::uint64_t worker);

}  // namespace volbound
