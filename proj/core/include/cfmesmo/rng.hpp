#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace cfmesmo {

using Rng = std::mt19937_64;

/// Derives an independent, reproducible stream from a root seed and a path of
/// integer tags (e.g. {iteration, sample}). Streams with different paths do not
/// share state, so per-task streams can be consumed in any order.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto tag : path) {
    words.push_back(static_cast<std::uint32_t>(tag));
    words.push_back(static_cast<std::uint32_t>(tag >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Draws a fresh 64-bit seed from a parent stream.
inline std::uint64_t split_seed(Rng& rng) { return rng(); }

}  // namespace cfmesmo
