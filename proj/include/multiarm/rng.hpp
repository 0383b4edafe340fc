#pragma once

#include <cstdint>
#include <vector>

#include "multiarm/errors.hpp"

namespace multiarm {

// Deterministic uniform stream (PCG32). A (seed, stream_id) pair always
// reproduces the same draws; distinct stream ids select distinct sequences,
// so replicates and roles can be seeded independently of execution order.
// Streams are plain values and can be copied or moved across threads.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id) {
    inc_ = (stream_id << 1u) | 1u;
    state_ = 0u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const std::uint32_t xorshifted =
        static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  // uniform double in [0, 1) with 53 random bits
  double uniform() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // index drawn proportionally to the (non-negative) weights
  int categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) {
      throw ValidationError("categorical: all weights are zero");
    }
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

 private:
  std::uint64_t state_{0};
  std::uint64_t inc_{1};
};

}  // namespace multiarm
