#include <doctest.h>

#include <algorithm>
#include <set>

#include "rainbow/errors.hpp"
#include "rainbow/geometry.hpp"

using namespace rainbow;

namespace {

void check_identities(const TreeGeometry& g) {
  const int L = g.levels();
  REQUIRE(L >= 2);
  CHECK(g.m(L) == 1);
  CHECK(g.n(L) == g.capacity());
  uint64_t slots = g.m1();
  for (int i = 2; i <= L; ++i) {
    const uint64_t b = g.b(i);
    CHECK((b & (b - 1)) == 0);
    CHECK((g.m(i) & (g.m(i) - 1)) == 0);
    slots += g.m(i) * g.b(i);
    if (i >= 3) {
      CHECK(g.m(i - 1) == g.m(i) * g.f(i));
      CHECK((g.f(i) & (g.f(i) - 1)) == 0);
      CHECK(g.n(i) == g.b(i) + g.f(i) * g.n(i - 1) + g.remainder(i));
    }
  }
  CHECK(slots == g.capacity());
}

}  // namespace

TEST_CASE("schedule identities across capacities") {
  for (uint64_t cap = 64; cap <= (uint64_t{1} << 22); cap = cap * 3 / 2 + 1) {
    CAPTURE(cap);
    const auto g = derive_geometry(cap);
    check_identities(g);
  }
}

TEST_CASE("small capacities give a two-level tree") {
  const auto g = derive_geometry(200);
  CHECK(g.levels() == 2);
  CHECK(g.m(2) == 1);
  CHECK(g.b(2) + g.m1() == 200);
  const auto c = solve_color_distribution(g, 200);
  CHECK(c.p[2] == ColorDistribution::kOne);
  CHECK_THROWS_AS(derive_geometry(1), GeometryError);
}

TEST_CASE("level count never drops as capacity doubles") {
  int prev = 0;
  for (int e = 12; e <= 22; ++e) {
    const auto g = derive_geometry(uint64_t{1} << e);
    CHECK(g.levels() >= prev);
    prev = g.levels();
  }
}

TEST_CASE("layout is a bijection between slots and buffers") {
  const auto g = derive_geometry(uint64_t{1} << 14);
  std::vector<char> seen(g.capacity(), 0);
  for (int i = 2; i <= g.levels(); ++i) {
    for (uint64_t j = 0; j < g.m(i); ++j) {
      for (uint64_t s = g.buffer_start(i, j); s < g.buffer_start(i, j) + g.b(i); ++s) {
        int level = 0;
        uint64_t index = 0;
        g.locate(s, level, index);
        CHECK(level == i);
        CHECK(index == j);
        CHECK(seen[s] == 0);
        seen[s] = 1;
      }
    }
  }
  for (uint64_t s = g.upper_slots(); s < g.capacity(); ++s) {
    int level = 0;
    uint64_t index = 0;
    g.locate(s, level, index);
    CHECK(level == 1);
    CHECK(index == s - g.upper_slots());
    seen[s] = 1;
  }
  CHECK(std::count(seen.begin(), seen.end(), 1) == static_cast<long>(g.capacity()));
}

TEST_CASE("subtree sizes add up") {
  for (uint64_t cap : {uint64_t{1} << 12, uint64_t{1} << 16, uint64_t{300000}}) {
    const auto g = derive_geometry(cap);
    const int L = g.levels();
    CHECK(g.subtree_size(L, 0) == cap);
    for (int i = 3; i <= L; ++i) {
      for (uint64_t k = 0; k < g.m(i); ++k) {
        uint64_t sum = g.b(i);
        for (uint64_t c : children_of(k, g.m(i), g.m(i - 1))) sum += g.subtree_size(i - 1, c);
        CHECK(sum == g.subtree_size(i, k));
      }
    }
  }
}

TEST_CASE("bit-reversed parent and children") {
  CHECK(bit_reversed_parent(13, 16, 4) == 1);
  CHECK(bit_reversed_parent(0, 16, 4) == 0);
  CHECK_THROWS_AS(bit_reversed_parent(16, 16, 4), ContractError);
  for (uint64_t k = 0; k < 4; ++k)
    for (uint64_t c : children_of(k, 4, 32)) CHECK(bit_reversed_parent(c, 32, 4) == k);
}

TEST_CASE("leaf counts match enumeration") {
  const std::vector<uint64_t> expect = {3, 3, 3, 2};
  for (uint64_t k = 0; k < 4; ++k) {
    CHECK(leaf_slots_of(k, 4, 11).size() == expect[k]);
    CHECK(leaf_slot_count(k, 4, 11) == expect[k]);
  }
  for (uint64_t m1 = 1; m1 <= 600; ++m1) {
    for (uint64_t mi = 2; mi <= 64; mi *= 2) {
      uint64_t lo = ~0ull, hi = 0;
      for (uint64_t k = 0; k < mi; ++k) {
        const uint64_t c = leaf_slot_count(k, mi, m1);
        REQUIRE(c == leaf_slots_of(k, mi, m1).size());
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
      CHECK(hi - lo <= 1);
    }
  }
}

TEST_CASE("colour distribution") {
  for (uint64_t cap : {uint64_t{1} << 12, uint64_t{1} << 14, uint64_t{1} << 16, uint64_t{1} << 18, uint64_t{777777}}) {
    CAPTURE(cap);
    const auto g = derive_geometry(cap);
    const auto c = solve_color_distribution(g, cap);
    const int L = g.levels();
    uint64_t sum = 0;
    for (int i = 2; i <= L; ++i) {
      CHECK(c.p[i] > 0);
      sum += c.p[i];
    }
    CHECK(sum == ColorDistribution::kOne);
    CHECK(eq1_window_violation(g, c) == 0);
    CHECK(eq1_window_violation(g.with_m1(g.m1() + cap / 10), c) == 0);
    // p_i tracks b_{i-1}/n_{i-1} within a factor of 8.
    for (int i = 3; i <= L; ++i) {
      const double ratio = c.probability(i) / (static_cast<double>(g.b(i - 1)) / static_cast<double>(g.n(i - 1)));
      CHECK(ratio >= 1.0 / 8);
      CHECK(ratio <= 8.0);
    }
    CHECK(c.draw(0) == 2);
    CHECK(c.draw(ColorDistribution::kOne - 1) == L);
  }
}

TEST_CASE("window check flags a bad distribution") {
  const auto g = derive_geometry(uint64_t{1} << 16);
  auto c = solve_color_distribution(g, g.capacity());
  // Shift all mass of level 2 to the root.
  c.cumulative[2] = 1;
  CHECK(eq1_window_violation(g, c) == 2);
}
