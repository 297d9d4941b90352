#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace sgrl {

using Rng = std::mt19937_64;

/// Independent generator for a named substream of a base seed.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (std::uint64_t s : stream) {
    words.push_back(static_cast<std::uint32_t>(s));
    words.push_back(static_cast<std::uint32_t>(s >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Substream tags.
enum class Stream : std::uint64_t {
  kModes = 1,
  kNoise = 2,
  kBatch = 3,
  kReset = 4,
  kInit = 5,
  kBehaviorClone = 6,
  kPairs = 7,
  kEval = 8,
};

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return make_rng(seed, {static_cast<std::uint64_t>(stream), index});
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_index(Rng& rng, int n) {
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

}  // namespace sgrl
