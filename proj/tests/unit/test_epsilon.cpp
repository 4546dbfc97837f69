#include <doctest.h>

#include <algorithm>
#include <unordered_set>

#include "rainbow/epsilon_table.hpp"
#include "rainbow/errors.hpp"
#include "support.hpp"

using namespace rainbow;

namespace {

void require_ok(const EpsilonTable& t) {
  const EpsilonReport rep = t.check();
  for (size_t i = 0; i < std::min<size_t>(rep.violations.size(), 8); ++i) MESSAGE(rep.violations[i]);
  REQUIRE(rep.ok());
}

void require_queries(const EpsilonTable& t, const std::vector<uint64_t>& live, size_t stride = 1) {
  for (size_t j = 0; j < live.size(); j += stride) {
    std::vector<uint64_t> log;
    const QueryResult q = t.query(live[j], &log);
    REQUIRE(q.found);
    REQUIRE(log.size() == q.probes);
    REQUIRE(t.probe_sequence(live[j], log.size()) == log);
  }
}

struct Churn {
  uint64_t inserts = 0, erases = 0;
};

// Random walk in n between lo and hi, replaying every receipt.
Churn churn(EpsilonTable& t, std::vector<uint64_t>& live, std::vector<uint64_t>& pool, size_t& next, int ops,
            size_t lo, size_t hi, uint64_t seed, int check_every) {
  Rng rng(seed);
  Churn c;
  for (int op = 0; op < ops; ++op) {
    const auto pre = t.slots();
    OpReceipt r;
    const bool up = live.size() <= lo || (live.size() < hi && rng.below(2) == 0);
    if (up) {
      const uint64_t k = pool.at(next++);
      r = t.insert(k);
      live.push_back(k);
      ++c.inserts;
    } else {
      const size_t i = rng.below(live.size());
      r = t.erase(live[i]);
      live[i] = live.back();
      live.pop_back();
      ++c.erases;
    }
    REQUIRE(testsupport::replay(pre, r, t.slot_count()) == t.slots());
    REQUIRE(t.size() == live.size());
    if (check_every && op % check_every == 0) require_ok(t);
  }
  return c;
}

}  // namespace

TEST_CASE("subtable scale follows epsilon and the anchor") {
  CHECK(subtable_scale(0.25, 1 << 16) == 512);
  CHECK(subtable_scale(0.125, 1 << 12) == 2048);
  CHECK(subtable_scale(1.0 / 64, 1 << 16) == 0);  // below 8 / sqrt(N)
  CHECK(subtable_scale(0.25, 100) == 0);           // fewer than 64 per subtable
  CHECK(subtable_scale(0.25, 4096, 64) == 64);
}

TEST_CASE("normal mode keeps its rules and the load target under churn") {
  auto pool = testsupport::fresh_keys(101, 60000);
  std::vector<uint64_t> live(pool.begin(), pool.begin() + 20000);
  size_t next = live.size();
  EpsilonOptions o;
  o.epsilon = 0.25;
  EpsilonTable t(o, 7);
  t.build(live);
  REQUIRE(t.mode() == EpsilonMode::Normal);
  CHECK(t.k() == 512);
  require_ok(t);
  require_queries(t, live, 7);
  churn(t, live, pool, next, 3000, 19000, 21000, 5, 500);
  require_ok(t);
  require_queries(t, live, 3);
  CHECK(t.load() >= 1.0 - 3.5 * o.epsilon);
  for (uint64_t k : {uint64_t{3}, uint64_t{5}, uint64_t{99}}) CHECK_FALSE(t.contains(k));
}

TEST_CASE("small subtables exercise under-fill and the shared spill array") {
  auto pool = testsupport::fresh_keys(202, 20000);
  std::vector<uint64_t> live(pool.begin(), pool.begin() + 5000);
  size_t next = live.size();
  EpsilonOptions o;
  o.epsilon = 0.125;
  o.k_override = 64;
  EpsilonTable t(o, 3);
  t.build(live);
  REQUIRE(t.mode() == EpsilonMode::Normal);
  require_ok(t);
  uint64_t under_seen = 0, spill_seen = 0;
  Rng rng(9);
  for (int round = 0; round < 20; ++round) {
    churn(t, live, pool, next, 150, 4500, 5500, 100 + round, 0);
    const EpsilonReport rep = t.check();
    for (const auto& v : rep.violations) MESSAGE(v);
    REQUIRE(rep.ok());
    under_seen += rep.underfilled;
    spill_seen += rep.spilled;
  }
  CHECK(under_seen > 0);
  CHECK(spill_seen > 0);
  require_queries(t, live);
  const auto sizes = t.overflow_sizes();
  CHECK(sizes.size() == t.subtables());
}

TEST_CASE("an overflowing spill array switches to global failure and back") {
  auto pool = testsupport::fresh_keys(303, 8000);
  std::vector<uint64_t> live(pool.begin(), pool.begin() + 2000);
  size_t next = live.size();
  EpsilonOptions o;
  o.epsilon = 0.125;
  o.k_override = 64;
  o.spill_scale = 0.002;  // |B| = 1
  EpsilonTable t(o, 4);
  t.build(live);
  CHECK(t.spill_size() == 1);
  bool saw_failure = t.mode() == EpsilonMode::Failure;
  bool saw_normal = t.mode() == EpsilonMode::Normal;
  for (int round = 0; round < 30; ++round) {
    churn(t, live, pool, next, 40, 1900, 2100, 500 + round, 0);
    require_ok(t);
    saw_failure = saw_failure || t.mode() == EpsilonMode::Failure;
    saw_normal = saw_normal || t.mode() == EpsilonMode::Normal;
    if (t.mode() == EpsilonMode::Failure) {
      CHECK(t.slots()[0] != kEmpty);
      require_queries(t, live, 11);
    }
  }
  CHECK(saw_failure);
  CHECK(t.failures() > 0);
  require_queries(t, live);
  const uint64_t absent = 12345;
  std::vector<uint64_t> log;
  const QueryResult q = t.query(absent, &log);
  CHECK_FALSE(q.found);
  CHECK(t.probe_sequence(absent, log.size()) == log);
}

TEST_CASE("tiny epsilon falls back to one plain table") {
  auto pool = testsupport::fresh_keys(404, 6000);
  std::vector<uint64_t> live(pool.begin(), pool.begin() + 4000);
  size_t next = live.size();
  EpsilonOptions o;
  o.epsilon = 1.0 / 64;
  EpsilonTable t(o, 5);
  t.build(live);
  CHECK(t.mode() == EpsilonMode::Plain);
  CHECK(t.slot_count() == live.size());
  churn(t, live, pool, next, 800, 3500, 4500, 6, 200);
  require_ok(t);
  require_queries(t, live, 5);
}

TEST_CASE("crossing an anchor threshold rebuilds everything") {
  auto pool = testsupport::fresh_keys(505, 20000);
  std::vector<uint64_t> live(pool.begin(), pool.begin() + 4000);
  size_t next = live.size();
  EpsilonOptions o;
  o.epsilon = 0.25;
  o.base = 4000;
  EpsilonTable t(o, 8);
  t.build(live);
  const uint64_t a0 = t.anchor();
  churn(t, live, pool, next, 800, 4700, 4800, 10, 0);
  CHECK(t.anchor() > a0);
  CHECK(t.anchor_rebuilds() >= 1);
  require_ok(t);
  require_queries(t, live, 3);
}

TEST_CASE("adopt restores normal and failure layouts") {
  auto keys = testsupport::fresh_keys(606, 3000);
  for (double spill : {1.0, 0.002}) {
    EpsilonOptions o;
    o.epsilon = 0.125;
    o.k_override = 64;
    o.base = 2000;
    o.spill_scale = spill;
    EpsilonTable a(o, 12);
    a.build(keys);
    EpsilonTable b(o, 12);
    b.adopt(a.slots(), a.anchor());
    CHECK(b.mode() == a.mode());
    CHECK(b.slots() == a.slots());
    require_ok(b);
    require_queries(b, keys, 13);
  }
}

TEST_CASE("same seed, same receipts") {
  auto keys = testsupport::fresh_keys(707, 3000);
  EpsilonOptions o;
  o.epsilon = 0.125;
  o.k_override = 128;
  EpsilonTable a(o, 1), b(o, 1);
  a.build(std::vector<uint64_t>(keys.begin(), keys.begin() + 2500));
  b.build(std::vector<uint64_t>(keys.begin(), keys.begin() + 2500));
  for (size_t i = 2500; i < 2700; ++i) {
    const OpReceipt ra = a.insert(keys[i]), rb = b.insert(keys[i]);
    CHECK(ra.moves() == rb.moves());
  }
  for (size_t i = 0; i < 200; ++i) {
    a.erase(keys[i]);
    b.erase(keys[i]);
  }
  CHECK(a.slots() == b.slots());
}

TEST_CASE("errors are typed") {
  auto keys = testsupport::fresh_keys(808, 2000);
  EpsilonOptions o;
  o.epsilon = 0.125;
  o.k_override = 64;
  EpsilonTable t(o, 2);
  t.build(keys);
  CHECK_THROWS_AS(t.insert(keys[0]), KeyError);
  CHECK_THROWS_AS(t.erase(42), KeyError);
  CHECK_THROWS_AS(t.insert(kEmpty), ContractError);
  EpsilonOptions bad;
  bad.epsilon = 0.7;
  CHECK_THROWS_AS(EpsilonTable(bad, 1), ContractError);
}

TEST_CASE("fixed-capacity table switches modes at its threshold") {
  const uint64_t N = 20000;
  FixedCapacityTable t(N, 0.05, 21);
  CHECK(t.threshold() >= 18000);
  CHECK(t.threshold() <= 19000);
  CHECK(t.max_size() == 19000);
  auto pool = testsupport::fresh_keys(909, 30000);
  std::vector<uint64_t> live(pool.begin(), pool.begin() + 17000);
  size_t next = live.size();
  t.build(live);
  CHECK(t.mode() == FixedCapacityTable::Mode::Linear);
  while (live.size() < t.max_size()) {
    const auto pre = t.slots();
    const OpReceipt r = t.insert(pool[next]);
    live.push_back(pool[next++]);
    auto post = testsupport::replay(pre, r);
    auto now = t.slots();
    for (auto* v : {&post, &now})
      for (auto& k : *v)
        if (k == kTombstone) k = kEmpty;
    REQUIRE(post == now);
  }
  CHECK(t.mode() == FixedCapacityTable::Mode::Epsilon);
  CHECK(t.slots().size() == N);
  CHECK_THROWS_AS(t.insert(pool[next]), CapacityError);
  for (const auto& v : t.check()) MESSAGE(v);
  CHECK(t.check().empty());
  for (size_t j = 0; j < live.size(); j += 17) {
    std::vector<uint64_t> log;
    REQUIRE(t.query(live[j], &log).found);
    CHECK(t.probe_sequence(live[j], log.size()) == log);
  }
  Rng rng(3);
  while (live.size() > 17500) {
    const size_t i = rng.below(live.size());
    t.erase(live[i]);
    live[i] = live.back();
    live.pop_back();
  }
  CHECK(t.mode() == FixedCapacityTable::Mode::Linear);
  CHECK(t.check().empty());
  CHECK(t.mode_switches() == 2);
  for (uint64_t k : live) REQUIRE(t.contains(k));
}
