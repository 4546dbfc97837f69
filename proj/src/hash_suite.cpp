#include "rainbow/hash_suite.hpp"

#include "rainbow/errors.hpp"

namespace rainbow {

uint64_t uniform_below(HashSeed seed, uint64_t key, uint64_t m) {
  require(m >= 1, "uniform_below: m must be positive");
  return reduce_range(mix64(seed, key), m);
}

bool bernoulli(HashSeed seed, uint64_t key, uint64_t p_num, uint64_t p_den) {
  require(p_den >= 1, "bernoulli: denominator must be positive");
  require(p_num <= p_den, "bernoulli: numerator exceeds denominator");
  return uniform_below(seed, key, p_den) < p_num;
}

uint64_t Rng::below(uint64_t m) {
  require(m >= 1, "Rng::below: m must be positive");
  return reduce_range(next(), m);
}

}  // namespace rainbow
