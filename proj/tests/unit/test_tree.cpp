#include <doctest.h>

#include <algorithm>
#include <unordered_set>

#include "rainbow/errors.hpp"
#include "rainbow/rainbow_tree.hpp"
#include "support.hpp"

using namespace rainbow;

namespace {

bool is_prefix(const std::vector<uint64_t>& a, const std::vector<uint64_t>& b) {
  return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

void require_ok(const RainbowTree& t) {
  const TreeReport rep = t.check();
  for (const auto& v : rep.violations) MESSAGE(v);
  REQUIRE(rep.ok());
}

// Churn a full table: erase a random key, insert a fresh one (or put the
// erased key back), checking receipts and the shadow set on the way.
void churn(RainbowTree& t, std::vector<uint64_t>& live, uint64_t seed, int ops, int check_every) {
  Rng rng(seed);
  auto fresh = testsupport::fresh_keys(seed * 7 + 1, ops);
  size_t next = 0;
  for (int op = 0; op < ops; ++op) {
    const size_t at = rng.below(live.size());
    const uint64_t victim = live[at];
    auto pre = t.slots();
    OpReceipt r = t.erase(victim);
    REQUIRE(testsupport::replay(pre, r) == t.slots());
    REQUIRE(t.has_free_slot());
    CHECK_FALSE(t.contains(victim));
    const uint64_t incoming = rng.below(4) == 0 ? victim : fresh[next++];
    pre = t.slots();
    r = t.insert(incoming);
    REQUIRE(testsupport::replay(pre, r) == t.slots());
    live[at] = incoming;
    REQUIRE(t.contains(incoming));
    if (check_every > 0 && op % check_every == 0) {
      require_ok(t);
      for (uint64_t k : live) REQUIRE(t.contains(k));
    }
  }
}

}  // namespace

TEST_CASE("build lays out a full table and a table with one free slot") {
  for (uint64_t cap : {600ULL, 4096ULL, 20000ULL}) {
    for (uint64_t spare : {0ULL, 1ULL}) {
      RainbowTree t(cap, 3 + cap);
      auto keys = testsupport::fresh_keys(cap + spare, cap - spare);
      OpReceipt r = t.build(keys);
      CHECK(r.rebuilds.size() == 1);
      require_ok(t);
      CHECK(t.size() == cap - spare);
      CHECK(t.has_free_slot() == (spare == 1));
      for (uint64_t k : keys) REQUIRE(t.contains(k));
      for (uint64_t k : testsupport::fresh_keys(cap * 31, 200))
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) CHECK_FALSE(t.contains(k));
    }
  }
}

TEST_CASE("build and updates reject bad input") {
  RainbowTree t(600, 1);
  auto keys = testsupport::fresh_keys(1, 600);
  CHECK_THROWS_AS(t.build(std::vector<uint64_t>(keys.begin(), keys.begin() + 100)), ContractError);
  auto dup = keys;
  dup[1] = dup[0];
  CHECK_THROWS_AS(t.build(dup), ContractError);
  t.build(keys);
  CHECK_THROWS_AS(t.insert(12345), ContractError);
  t.erase(keys[3]);
  CHECK_THROWS_AS(t.insert(keys[4]), KeyError);
  CHECK_THROWS_AS(t.erase(keys[4]), ContractError);
}

TEST_CASE("updates keep the layout and the shadow set") {
  for (uint64_t cap : {600ULL, 4096ULL, 70000ULL}) {
    RainbowTree t(cap, 17 * cap);
    auto live = testsupport::fresh_keys(cap + 5, cap);
    t.build(live);
    churn(t, live, cap, cap > 10000 ? 1500 : 3000, cap > 10000 ? 500 : 100);
    require_ok(t);
  }
}

TEST_CASE("query log is a prefix of the probe sequence") {
  RainbowTree t(4096, 9);
  auto live = testsupport::fresh_keys(9, 4096);
  t.build(live);
  churn(t, live, 91, 300, 0);
  std::vector<uint64_t> probe = live;
  auto absent = testsupport::fresh_keys(777, 300);
  probe.insert(probe.end(), absent.begin(), absent.end());
  for (uint64_t k : probe) {
    std::vector<uint64_t> log;
    const QueryResult q = t.query(k, &log);
    REQUIRE(log.size() == q.probes);
    REQUIRE(is_prefix(log, t.probe_sequence(k)));
    if (q.found) {
      CHECK(t.slots()[q.slot] == k);
      CHECK(t.probe_complexity(k) == log.size());
    }
  }
  const auto seq = t.probe_sequence(live[0], 10);
  CHECK(seq.size() == 10);
}

TEST_CASE("grow and shrink move the capacity one slot at a time") {
  const uint64_t cap = 4096;
  RainbowTree t(cap, 44);
  auto live = testsupport::fresh_keys(44, cap);
  t.build(live);
  auto fresh = testsupport::fresh_keys(4400, 2000);
  size_t next = 0;
  Rng rng(4);
  for (int step = 0; step < 300; ++step) {
    auto pre = t.slots();
    pre.push_back(kEmpty);
    OpReceipt r = t.grow();
    REQUIRE(testsupport::replay(pre, r) == t.slots());
    t.insert(fresh[next]);
    live.push_back(fresh[next++]);
    if (step % 50 == 0) require_ok(t);
  }
  CHECK(t.capacity() == cap + 300);
  for (int step = 0; step < 400; ++step) {
    const size_t at = rng.below(live.size());
    const uint64_t victim = live[at];
    live[at] = live.back();
    live.pop_back();
    if (step % 2 == 0) {
      t.erase_shrink(victim);
    } else {
      t.erase(victim);
      t.shrink();
    }
    REQUIRE_FALSE(t.has_free_slot());
    if (step % 50 == 0) {
      require_ok(t);
      for (uint64_t k : live) REQUIRE(t.contains(k));
    }
  }
  CHECK(t.capacity() == cap - 100);
  CHECK(t.size() == live.size());
  require_ok(t);
}

TEST_CASE("shrink drops the slot the key occupied") {
  RainbowTree t(4096, 5);
  auto live = testsupport::fresh_keys(5, 4096);
  t.build(live);
  const uint64_t last = t.slots().back();
  const uint64_t before = t.capacity();
  t.erase_shrink(last);
  CHECK(t.capacity() == before - 1);
  CHECK_FALSE(t.contains(last));
  require_ok(t);
}

TEST_CASE("operations are deterministic in the seed") {
  auto run = [](uint64_t seed) {
    RainbowTree t(4096, seed);
    auto live = testsupport::fresh_keys(8, 4096);
    t.build(live);
    churn(t, live, 3, 200, 0);
    return t.slots();
  };
  CHECK(run(1) == run(1));
  CHECK(run(1) != run(2));
}

TEST_CASE("sampling returns keys of the requested colour") {
  RainbowTree t(4096, 12);
  auto live = testsupport::fresh_keys(12, 4096);
  t.build(live);
  const NodeRef root = t.root();
  for (NodeRef c : t.children(root)) {
    OpReceipt r;
    if (auto k = t.sample(c, root.level, r)) CHECK(t.node_of(*k) == root);
    if (auto k = t.sample(c, c.level, r)) CHECK(t.node_of(*k) == c);
    CHECK(r.probes > 0);
  }
  OpReceipt r;
  CHECK_THROWS_AS(t.sample(root, 1, r), ContractError);
}

TEST_CASE("rebuild keeps keys and layout rules") {
  RainbowTree t(20000, 13);
  auto live = testsupport::fresh_keys(13, 20000);
  t.build(live);
  churn(t, live, 13, 200, 0);
  OpReceipt r;
  t.rebuild(t.root(), r);
  require_ok(t);
  for (NodeRef c : t.children(t.root())) t.rebuild(c, r);
  require_ok(t);
  for (uint64_t k : live) REQUIRE(t.contains(k));
}

TEST_CASE("snapshot adoption restores every cache") {
  RainbowTree t(4096, 21);
  auto live = testsupport::fresh_keys(21, 4096);
  t.build(live);
  churn(t, live, 21, 200, 0);
  t.erase(live[0]);
  RainbowTree u(4096, 21);
  u.adopt(t.slots());
  require_ok(u);
  CHECK(u.size() == t.size());
  CHECK(u.has_free_slot());
  u.insert(live[0]);
  require_ok(u);
}

TEST_CASE("feasibility by counting agrees with feasibility by matching") {
  Rng rng(99);
  int infeasible = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const uint64_t cap = 300 + rng.below(800);
    RainbowTree t(cap, trial);
    // Skew the census so windows fail sometimes.
    const uint64_t count = cap - rng.below(cap / 4 + 1);
    auto keys = testsupport::fresh_keys(trial * 13 + 1, count);
    const auto census = FeasibilityCensus::from_keys(t, keys);
    const TreeGeometry& g = t.geometry();
    for (int i = 2; i <= g.levels(); ++i) {
      for (uint64_t j = 0; j < g.m(i); ++j) {
        const bool a = weakly_feasible_by_counting(census, {i, j});
        const bool b = weakly_feasible_by_matching(census, {i, j});
        REQUIRE(a == b);
        infeasible += !a;
      }
    }
  }
  CHECK(infeasible > 0);
}

TEST_CASE("tree feasibility caches agree with the census") {
  RainbowTree t(20000, 31);
  auto live = testsupport::fresh_keys(31, 20000);
  t.build(live);
  const auto census = FeasibilityCensus::from_keys(t, live);
  const TreeGeometry& g = t.geometry();
  for (int i = 2; i < g.levels(); ++i)
    for (uint64_t j = 0; j < g.m(i); ++j) {
      CHECK(t.subtree_keys({i, j}) == census.subtree_keys({i, j}));
      CHECK(t.weakly_feasible({i, j}) == weakly_feasible_by_counting(census, {i, j}));
    }
}
