// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Reproducible random streams keyed by (seed, purpose, index).
// Each stream is an independently seeded engine, so results do not depend
// on the order in which streams are consumed.

#ifndef WIDEFORMER_RNG_HPP_
#define WIDEFORMER_RNG_HPP_

#include <cstdint>
#include <random>

namespace wf {

enum class Purpose : std::uint32_t {
  Init = 1, Attention = 2, Inputs = 3, Oracle = 4, Cotangent = 5
};

inline std::mt19937_64 rng_stream(std::uint64_t seed, Purpose purpose, std::uint64_t index) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32),
                    static_cast<std::uint32_t>(purpose), std::uint32_t(index),
                    std::uint32_t(index >> 32), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

// Init seed for the k-th Monte-Carlo initialization of a run.
inline std::uint64_t init_seed(std::uint64_t seed, std::uint64_t k) {
  return seed * 0x9e3779b97f4a7c15ull + k * 0xbf58476d1ce4e5b9ull + 1;
}

}  // namespace wf

#endif  // WIDEFORMER_RNG_HPP_
