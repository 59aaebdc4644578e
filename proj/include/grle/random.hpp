#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace grle {

// Named random substreams. Each (seed, stream, index) triple yields an
// independent generator, so draws for one purpose never shift another.
enum class Stream : std::uint64_t {
  device = 1,
  server = 2,
  jitter = 3,
  csi = 4,
  topology = 5,
  policy = 6,
  replay = 7,
  init = 8,
};

class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
  }

  // Uniform in [0, 1) with 53 random bits; portable across standard libraries.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace grle
