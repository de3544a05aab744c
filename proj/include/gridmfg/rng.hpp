#pragma once

#include <cstdint>
#include <random>

namespace gridmfg {

/// Purpose tags for deriving independent random streams from one master seed.
enum class StreamKind : std::uint64_t {
  prosumers = 1,
  consumers = 2,
  learner = 3,
  renewable = 4,
  case_generation = 5,
  actions = 6,
  test = 99,
};

/// SplitMix64 finalizer. Used to turn (seed, stream id) pairs into
/// well-separated engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_id(StreamKind kind, std::uint64_t index) {
  return (static_cast<std::uint64_t>(kind) << 40) | index;
}

/// Deterministic random stream. The engine seed is a pure function of the
/// master seed and the stream id, so adding a stream never shifts the draws
/// of another. Uniforms are built from raw 64-bit words rather than
/// std::uniform_real_distribution so sequences are identical across standard
/// library implementations.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream)
      : seed_(master_seed),
        stream_(stream),
        engine_(splitmix64(splitmix64(master_seed) ^ splitmix64(~stream))) {}

  RngStream(std::uint64_t master_seed, StreamKind kind, std::uint64_t index)
      : RngStream(master_seed, stream_id(kind, index)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform draw in [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return r % n;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

}  // namespace gridmfg
