#pragma once

#include <cstdint>
#include <random>

namespace pbi {

using Rng = std::mt19937_64;

// Independent generator for (seed, stream). Streams used by the trainer:
// 0 = initialization, 1 = BPR sampling, 2 = PBi sampling, 3 = validation carve.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

// Unbiased integer in [0, n). Written out rather than using
// std::uniform_int_distribution so draws are identical across standard libraries.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = Rng::max() - (Rng::max() % n + 1) % n;
  std::uint64_t x = rng();
  while (x > limit) x = rng();
  return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace pbi
