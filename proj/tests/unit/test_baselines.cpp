#include <doctest.h>

#include <algorithm>
#include <unordered_set>

#include "rainbow/baselines.hpp"
#include "rainbow/errors.hpp"
#include "support.hpp"

using namespace rainbow;

TEST_CASE("empty table answers in one probe") {
  for (ProbeKind kind : {ProbeKind::Linear, ProbeKind::Uniform}) {
    ProbingTable t(kind, 1000, 5, 0.1);
    const QueryResult q = t.query(12345);
    CHECK_FALSE(q.found);
    CHECK(q.probes == 1);
  }
}

TEST_CASE("churn matches a shadow set and queries follow the sequence") {
  for (ProbeKind kind : {ProbeKind::Linear, ProbeKind::Uniform}) {
    const uint64_t N = 2000;
    ProbingTable t(kind, N, 11, 0.05);
    auto pool = testsupport::fresh_keys(17, 6000);
    std::vector<uint64_t> live(pool.begin(), pool.begin() + 1800);
    size_t next = 1800;
    t.build(live);
    Rng rng(4);
    for (int op = 0; op < 4000; ++op) {
      const auto pre = t.slots();
      OpReceipt r;
      if (rng.below(2) == 0 && live.size() < 1900) {
        const uint64_t k = pool[next++ % pool.size()];
        if (t.contains(k)) continue;
        r = t.insert(k);
        live.push_back(k);
      } else {
        const size_t i = rng.below(live.size());
        r = t.erase(live[i]);
        live[i] = live.back();
        live.pop_back();
      }
      auto post = testsupport::replay(pre, r);
      auto actual = t.slots();
      for (auto& k : post)
        if (k == kTombstone) k = kEmpty;
      for (auto& k : actual)
        if (k == kTombstone) k = kEmpty;
      REQUIRE(post == actual);
    }
    CHECK(t.check().ok());
    CHECK(t.size() == live.size());
    for (uint64_t k : live) {
      std::vector<uint64_t> log;
      const QueryResult q = t.query(k, &log);
      REQUIRE(q.found);
      CHECK(q.probes == log.size());
      const auto seq = t.probe_sequence(k, log.size());
      CHECK(seq == log);
      CHECK(t.probe_complexity(k) == log.size());
    }
    CHECK(t.rebuilds() > 0);
  }
}

TEST_CASE("tombstones trigger a rebuild past epsilon N / 2") {
  ProbingTable t(ProbeKind::Linear, 1000, 2, 0.1);
  auto keys = testsupport::fresh_keys(3, 500);
  t.build(keys);
  for (int i = 0; i < 50; ++i) t.erase(keys[i]);
  CHECK(t.tombstones() == 50);
  CHECK(t.rebuilds() == 0);
  OpReceipt r = t.erase(keys[50]);
  CHECK(t.rebuilds() == 1);
  CHECK(t.tombstones() == 0);
  CHECK(r.rebuilds.size() == 1);
}

TEST_CASE("uniform sequence covers the table and errors are typed") {
  ProbingTable t(ProbeKind::Uniform, 64, 9, 0.1);
  const auto seq = t.probe_sequence(77);
  std::unordered_set<uint64_t> cover(seq.begin(), seq.end());
  CHECK(cover.size() == 64);
  auto keys = testsupport::fresh_keys(8, 64);
  t.build(keys);
  CHECK_THROWS_AS(t.insert(keys[0]), KeyError);
  CHECK_THROWS_AS(t.insert(999), CapacityError);
  CHECK_THROWS_AS(t.erase(999), KeyError);
  CHECK_THROWS_AS(t.insert(kEmpty), ContractError);
}
