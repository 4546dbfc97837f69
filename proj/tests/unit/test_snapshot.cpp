#include <doctest.h>

#include <cstdio>

#include "rainbow/errors.hpp"
#include "rainbow/snapshot.hpp"
#include "support.hpp"

using namespace rainbow;

namespace {

template <class T>
void churn(T& t, std::vector<uint64_t>& live, uint64_t seed, int pairs) {
  auto fresh = testsupport::fresh_keys(seed, pairs);
  for (int j = 0; j < pairs; ++j) {
    const size_t i = (j * 7919) % live.size();
    t.erase(live[i]);
    live[i] = fresh[j];
    t.insert(fresh[j]);
  }
}

}  // namespace

TEST_CASE("tree snapshot round trip is bit exact") {
  auto keys = testsupport::fresh_keys(1, 3000);
  RainbowTree t(3000, 42);
  t.build(keys);
  churn(t, keys, 99, 200);
  const auto bytes = encode(capture(t));
  CHECK(bytes.size() == 8 + 8 + 8 * 4 + 8 + 8 * 3000);
  const Snapshot s = decode(bytes);
  CHECK(s == capture(t));
  const RainbowTree back = restore_tree(s);
  CHECK(back.slots() == t.slots());
  for (uint64_t k : keys) CHECK(back.query(k).slot == t.query(k).slot);
  const SnapshotCheck c = validate_snapshot(bytes);
  CHECK(c.ok());
  CHECK(c.keys == 3000);
}

TEST_CASE("resizable snapshot round trip") {
  auto keys = testsupport::fresh_keys(2, 2000);
  ResizableTree t(1000, 5);
  t.build(keys);
  for (uint64_t k : testsupport::fresh_keys(3, 300)) t.grow_insert(k);
  const auto bytes = encode(capture(t));
  const SnapshotCheck c = validate_snapshot(bytes);
  CHECK(c.ok());
  CHECK(c.keys == 2300);
  ResizableTree back = restore_resizable(decode(bytes));
  CHECK(back.slots() == t.slots());
  back.grow_insert(77);
  CHECK(back.contains(77));
}

TEST_CASE("epsilon snapshot round trip in every mode") {
  SUBCASE("normal") {
    EpsilonOptions o;
    o.epsilon = 0.25;
    EpsilonTable t(o, 8);
    auto keys = testsupport::fresh_keys(4, 20000);
    t.build(keys);
    churn(t, keys, 5, 500);
    REQUIRE(t.mode() == EpsilonMode::Normal);
    const auto bytes = encode(capture(t));
    CHECK(validate_snapshot(bytes).ok());
    EpsilonTable back = restore_epsilon(decode(bytes));
    for (size_t i = 0; i < keys.size(); i += 37) CHECK(back.query(keys[i]).slot == t.query(keys[i]).slot);
    churn(back, keys, 6, 100);
    CHECK(back.check().ok());
  }
  SUBCASE("plain") {
    EpsilonTable t(EpsilonOptions{}, 8);
    t.build(testsupport::fresh_keys(4, 1500));
    REQUIRE(t.mode() == EpsilonMode::Plain);
    CHECK(validate_snapshot(encode(capture(t))).ok());
  }
  SUBCASE("failure") {
    EpsilonOptions o;
    o.epsilon = 0.25;
    o.k_override = 64;
    o.spill_scale = 0.002;
    EpsilonTable t(o, 3);
    auto keys = testsupport::fresh_keys(9, 4000);
    t.build(keys);
    for (int round = 0; round < 40 && t.mode() != EpsilonMode::Failure; ++round) churn(t, keys, 100 + round, 100);
    if (t.mode() == EpsilonMode::Failure) CHECK(validate_snapshot(encode(capture(t))).ok());
    else MESSAGE("failure mode not reached for this seed");
  }
}

TEST_CASE("malformed snapshots are rejected") {
  RainbowTree t(500, 1);
  t.build(testsupport::fresh_keys(1, 500));
  const auto good = encode(capture(t));
  auto bad = good;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode(bad), SnapshotError);
  bad = good;
  bad[8] = 9;  // version
  CHECK_THROWS_AS(decode(bad), SnapshotError);
  bad = good;
  bad[12] = 7;  // kind
  CHECK_THROWS_AS(decode(bad), SnapshotError);
  bad = good;
  bad.pop_back();
  CHECK_THROWS_AS(decode(bad), SnapshotError);
  Snapshot s = capture(t);
  s.header[2] ^= 1;
  CHECK_THROWS_AS(restore_tree(s), SnapshotError);
  s = capture(t);
  s.slots[3] = s.slots[4];  // duplicate key
  CHECK_THROWS_AS(restore_tree(s), SnapshotError);
  CHECK_THROWS_AS(restore_resizable(capture(t)), SnapshotError);
}

TEST_CASE("snapshot files") {
  RainbowTree t(300, 2);
  t.build(testsupport::fresh_keys(1, 300));
  const std::string path = "test_snapshot_tmp.bin";
  write_bytes(path, encode(capture(t)));
  CHECK(read_bytes(path) == encode(capture(t)));
  std::remove(path.c_str());
  CHECK_THROWS(read_bytes("/nonexistent/dir/x.bin"));
}
