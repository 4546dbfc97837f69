#pragma once
/**
 * Seeded 64-bit hashing used by every randomness consumer in the library.
 *
 * All functions are pure: the same (master, tag, key) gives the same output on
 * every platform. Runtime choices that are not a function of a key (sampling
 * probes, workload keys) come from Rng, which is itself seeded.
 */

#include <cstdint>

namespace rainbow {

// One tag per logical hash function.
enum class Domain : uint32_t {
  Status = 1,
  Bucket = 2,
  Color = 3,
  Subproblem = 4,
  Subtable = 5,
  CellProbe = 6,
  BaselineProbe = 7,
  Sampler = 8,
  Workload = 9,
  Threshold = 10,
  Overflow = 11,
};

struct HashSeed {
  uint64_t master = 0;
  uint32_t domain_tag = 0;
};

constexpr HashSeed seed_for(uint64_t master, Domain d) {
  return HashSeed{master, static_cast<uint32_t>(d)};
}

constexpr uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

// splitmix64 output function applied to z (gamma added first).
constexpr uint64_t splitmix_finalize(uint64_t z) {
  z += kGoldenGamma;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr uint64_t expand_tag(uint32_t tag) { return uint64_t{tag} * kGoldenGamma; }

constexpr uint64_t mix64(HashSeed seed, uint64_t key) {
  return splitmix_finalize(seed.master ^ expand_tag(seed.domain_tag) ^ key);
}

// i-th value of a per-key stream; index 0 differs from mix64(seed, key).
constexpr uint64_t mix64_stream(HashSeed seed, uint64_t key, uint64_t index) {
  return mix64(seed, mix64(seed, key) ^ splitmix_finalize(index));
}

// Multiply-shift reduction of a 64-bit value into [0, m).
constexpr uint64_t reduce_range(uint64_t x, uint64_t m) {
  return static_cast<uint64_t>((static_cast<unsigned __int128>(x) * m) >> 64);
}

uint64_t uniform_below(HashSeed seed, uint64_t key, uint64_t m);
bool bernoulli(HashSeed seed, uint64_t key, uint64_t p_num, uint64_t p_den);

// Derive an independent master for a sub-structure (one cell, one subtable).
constexpr uint64_t derive_master(uint64_t master, uint64_t salt) {
  return splitmix_finalize(master ^ splitmix_finalize(salt ^ 0x5851F42D4C957F2Dull));
}

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next() {
    uint64_t out = splitmix_finalize(state_);
    state_ += kGoldenGamma;
    return out;
  }
  uint64_t below(uint64_t m);
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

}  // namespace rainbow
