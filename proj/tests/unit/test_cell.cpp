#include <doctest.h>

#include <algorithm>
#include <set>

#include "rainbow/rainbow_cell.hpp"
#include "support.hpp"

using namespace rainbow;

TEST_CASE("cell parameters") {
  auto flat = CellParams::make(128);
  CHECK(flat.flat);
  CHECK(flat.bucket_size == 128);

  auto p = CellParams::make(256);
  CHECK_FALSE(p.flat);
  CHECK(p.num_buckets == 4);
  CHECK(p.bucket_size == 64);
  CHECK(p.sky_size == 32);

  auto q = CellParams::make(4096);
  CHECK(q.num_buckets == 8);
  CHECK(q.bucket_size == 512);
  CHECK(q.sky_size == 256);
  CHECK(q.num_buckets * q.bucket_size == 4096);
}

namespace {

struct Harness {
  std::vector<uint64_t> arr;
  RainbowCell cell;
  std::vector<uint64_t> live;

  Harness(uint64_t b, uint64_t fill, uint64_t seed) : arr(b + 7, 0) {
    cell = RainbowCell(&arr, 7, CellParams::make(b), seed);
    live = testsupport::fresh_keys(seed, fill);
    OpReceipt r;
    cell.init(live, r);
  }

  bool find(uint64_t key) {
    uint64_t probes = 0;
    return cell.query(key, probes, nullptr).found;
  }
};

}  // namespace

TEST_CASE("cell keeps its layout rules across updates") {
  for (uint64_t b : {64ULL, 256ULL, 1024ULL, 4096ULL}) {
    for (uint64_t spare : {0ULL, 1ULL}) {
      Harness h(b, b - spare, 11 + b + spare);
      REQUIRE(h.cell.check().ok());
      auto extra = testsupport::fresh_keys(999 + b, 4000);
      Rng rng(5);
      size_t next = 0;
      for (int op = 0; op < 1500; ++op) {
        const uint64_t victim = h.live[rng.below(h.live.size())];
        uint64_t local = kNoSlot;
        for (uint64_t i = 0; i < b; ++i)
          if (h.cell.at(i) == victim) local = i;
        REQUIRE(local != kNoSlot);
        const uint64_t key = extra[next++];
        std::vector<uint64_t> pre = h.arr;
        OpReceipt r;
        h.cell.update(local, key, r);
        CHECK(testsupport::replay(pre, r) == h.arr);
        std::replace(h.live.begin(), h.live.end(), victim, key);
        auto rep = h.cell.check();
        if (!rep.ok()) FAIL(rep.violations.front());
        if (op % 97 == 0) {
          for (uint64_t k : h.live) REQUIRE(h.find(k));
          CHECK_FALSE(h.find(victim));
        }
      }
    }
  }
}

TEST_CASE("cell query is found or exhausts its sequence") {
  Harness h(1024, 1023, 3);
  for (uint64_t k : h.live) {
    uint64_t probes = 0;
    std::vector<uint64_t> log;
    auto s = h.cell.query(k, probes, &log);
    REQUIRE(s.found);
    auto seq = h.cell.probe_sequence(k);
    REQUIRE(log.size() <= seq.size());
    CHECK(std::equal(log.begin(), log.end(), seq.begin()));
    CHECK(seq[log.size() - 1] == 7 + s.local);
  }
  uint64_t probes = 0;
  std::vector<uint64_t> log;
  const uint64_t absent = 0xABCDEF;
  CHECK_FALSE(h.cell.query(absent, probes, &log).found);
  auto seq = h.cell.probe_sequence(absent);
  CHECK(std::equal(log.begin(), log.end(), seq.begin()));
}

TEST_CASE("cell primary region is much smaller than the cell") {
  Harness h(4096, 4096, 9);
  uint64_t total = 0;
  for (uint64_t k : h.live) {
    uint64_t probes = 0;
    h.cell.query(k, probes, nullptr);
    total += probes;
  }
  CHECK(static_cast<double>(total) / h.live.size() < 4096 / 4);
}

TEST_CASE("cell failure indicator tracks the heavy counts") {
  // Drive one bucket out of range by filling with keys of a single bucket.
  std::vector<uint64_t> arr(256, 0);
  RainbowCell cell(&arr, 0, CellParams::make(256), 77);
  std::vector<uint64_t> keys;
  for (uint64_t k = 1; keys.size() < 256; ++k)
    if (cell.heavy(k) && cell.bucket(k) == 0 && keys.size() < 100) keys.push_back(k);
    else if (keys.size() >= 100) keys.push_back(k * 1000003ULL);
  OpReceipt r;
  cell.init(keys, r);
  auto rep = cell.check();
  CHECK(rep.ok());
  CHECK(rep.encoded_failure);
  CHECK(cell.failed());
  for (uint64_t k : keys) {
    uint64_t probes = 0;
    CHECK(cell.query(k, probes, nullptr).found);
  }
}
