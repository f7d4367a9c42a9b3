#pragma once

#include <cstdint>

namespace emsift {

// SplitMix64 generator with Box-Muller gaussians.
//
// Chosen over <random> engines because the exact sample stream is part of the
// reproducibility contract: std::normal_distribution output differs between
// standard libraries, and forked per-trace substreams make parallel generation
// order-independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64();

  // Uniform draw in [0, 1) with 53 random bits.
  double uniform01();

  // Standard normal via Box-Muller; caches the second draw of each pair.
  double gaussian();

  // Uniform integer in [0, n), n > 0. Unbiased via rejection.
  std::uint64_t uniform_below(std::uint64_t n);

  // Independent substream keyed by (construction seed, stream id). Stable no
  // matter how many draws the parent has made.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer; also used to derive fork seeds.
std::uint64_t mix64(std::uint64_t z);

}  // namespace emsift
