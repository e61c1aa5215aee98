#include "volbound/rng.hpp"

namespace volbound {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t mix_key(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

std::mt19937_64 seeded_engine(std::uint64_t key) {
  std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(splitmix64(key)),
                    static_cast<std::uint32_t>(splitmix64(key) >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t index)
    : key_(mix_key(seed, index)), engine_(seeded_engine(key_)) {}

RngStream RngStream::child(std::uint64_t index) const { return RngStream(key_, index); }

RngStream rng_substream(std::uint64_t seed, std::uint64_t worker) {
  return RngStream(seed, worker);
}

}  // namespace volbound
