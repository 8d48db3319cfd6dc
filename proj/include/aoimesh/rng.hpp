#ifndef AOIMESH_RNG_HPP
#define AOIMESH_RNG_HPP

#include <cstdint>
#include <random>

namespace aoimesh {

/// splitmix64 step; used to derive well-separated substream seeds from a
/// master seed so that any single run (topology sampling, fading, arrivals,
/// ALOHA) is replayable in isolation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for substream `stream` of purpose tag `purpose` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose,
                                 std::uint64_t stream = 0) {
  std::uint64_t s = master ^ (0x8f1bbcdcbfa53e0bULL * (purpose + 1));
  std::uint64_t a = splitmix64(s);
  s ^= 0xd6e8feb86659fd93ULL * (stream + 1);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

/// RNG substream purposes. Values are part of the reproducibility contract.
enum class RngPurpose : std::uint64_t {
  topology = 1,
  arrivals = 2,
  aloha = 3,
  fading = 4,
};

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, RngPurpose purpose,
                    std::uint64_t stream = 0) {
  return Rng(derive_seed(master, static_cast<std::uint64_t>(purpose), stream));
}

/// Uniform double in [0,1) from the top 53 bits; implementation-independent
/// unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

} // namespace aoimesh

#endif
