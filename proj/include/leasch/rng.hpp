#pragma once

#include <cstdint>
#include <random>

namespace leasch {

using Rng = std::mt19937_64;

// Independent named streams derived from one user seed, so e.g. the channel
// trace of a run never depends on how many draws the HARQ model consumed.
enum class Stream : std::uint32_t {
  init = 1,
  agent = 2,
  sandbox = 3,
  channel = 4,
  harq = 5,
  traffic = 6,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
  return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace leasch
