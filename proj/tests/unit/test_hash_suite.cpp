#include <doctest.h>

#include <array>
#include <cmath>
#include <set>

#include "rainbow/errors.hpp"
#include "rainbow/hash_suite.hpp"

using namespace rainbow;

// Expected values computed independently with a short Python model of splitmix64.
TEST_CASE("golden values") {
  CHECK(mix64(HashSeed{0, 0}, 0) == 0xE220A8397B1DCDAFull);
  CHECK(mix64(HashSeed{42, 1}, 12345) == 0xF4128794B7A0BC50ull);
  CHECK(mix64(HashSeed{0xDEADBEEF, 9}, 1) == 0x1215A36F5388D617ull);
  CHECK(mix64_stream(HashSeed{7, 8}, 99, 3) == 0x1CA8B36C38FF7C5Aull);
  CHECK(derive_master(1, 2) == 0x0E9E4021ABECD608ull);
}

TEST_CASE("rng follows the splitmix64 reference stream") {
  Rng r(0);
  CHECK(r.next() == 0xE220A8397B1DCDAFull);
  CHECK(r.next() == 0x6E789E6AA1B965F4ull);
  CHECK(r.next() == 0x06C45D188009454Full);
}

TEST_CASE("domains are separated") {
  std::set<uint64_t> seen;
  for (uint32_t d = 1; d <= 11; ++d) seen.insert(mix64(seed_for(5, static_cast<Domain>(d)), 77));
  CHECK(seen.size() == 11);
}

TEST_CASE("uniform_below is roughly uniform") {
  constexpr uint64_t m = 10;
  std::array<uint64_t, m> hist{};
  const auto seed = seed_for(3, Domain::Bucket);
  const uint64_t n = 100000;
  for (uint64_t k = 1; k <= n; ++k) ++hist[uniform_below(seed, k, m)];
  double chi = 0;
  for (auto h : hist) chi += std::pow(static_cast<double>(h) - n / m, 2) / (n / m);
  CHECK(chi < 30.0);  // 9 degrees of freedom; p < 1e-3 cut
}

TEST_CASE("bernoulli hits its rate") {
  const auto seed = seed_for(4, Domain::Status);
  uint64_t hits = 0;
  for (uint64_t k = 1; k <= 200000; ++k) hits += bernoulli(seed, k, 1, 8);
  CHECK(std::abs(static_cast<double>(hits) / 200000 - 0.125) < 0.005);
}

TEST_CASE("contract checks") {
  CHECK_THROWS_AS(uniform_below(HashSeed{}, 1, 0), ContractError);
  CHECK_THROWS_AS(bernoulli(HashSeed{}, 1, 3, 2), ContractError);
  Rng r(1);
  CHECK_THROWS_AS(r.below(0), ContractError);
}
