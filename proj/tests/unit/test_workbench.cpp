#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "rainbow/errors.hpp"
#include "rainbow/hash_suite.hpp"
#include "rainbow/workbench.hpp"
#include "support.hpp"

using namespace rainbow;

namespace {

const TableKind kAllKinds[] = {TableKind::Cell,  TableKind::Tree,   TableKind::Resizable, TableKind::Epsilon,
                               TableKind::Fixed, TableKind::Linear, TableKind::Uniform};

WorkloadSpec small(TableKind kind, uint64_t n, uint64_t pairs, double eps = 1.0 / 16) {
  WorkloadSpec w;
  w.table = {kind, n, eps, 7};
  w.pairs = pairs;
  w.audit_every = 1;
  return w;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("level boundaries") {
  CHECK(level_count(0.5) == 0);
  CHECK(level_count(1.0 / 16) == 1);      // log log 16 = 2
  CHECK(level_count(1.0 / 256) == 2);     // log log 256 = 3
  CHECK(level_count(1.0 / 65536) == 2);   // log log 2^16 = 4
  CHECK(level_count(std::ldexp(1.0, -17)) == 3);
  // eps = 1/256: L = 2, level 0 up to 2^4, level 1 up to 2^8, level 2 beyond.
  CHECK(probe_level(1, 1.0 / 256) == 0);
  CHECK(probe_level(16, 1.0 / 256) == 0);
  CHECK(probe_level(17, 1.0 / 256) == 1);
  CHECK(probe_level(256, 1.0 / 256) == 1);
  CHECK(probe_level(257, 1.0 / 256) == 2);
  CHECK(probe_level(~uint64_t{0}, 1.0 / 256) == 2);
  CHECK(probe_level(1u << 20, 0.5) == 0);
  CHECK_THROWS_AS(level_count(0.0), ContractError);
  CHECK_THROWS_AS(probe_level(0, 0.1), ContractError);
}

TEST_CASE("table names round trip") {
  for (TableKind k : kAllKinds) CHECK(parse_table_kind(to_string(k)) == k);
  CHECK(parse_table_kind("epsilon") == TableKind::Epsilon);
  CHECK_THROWS_AS(parse_table_kind("cuckoo"), ContractError);
  CHECK_THROWS_AS(parse_format("xml"), ContractError);
}

TEST_CASE("every adapter survives churn with audited receipts") {
  for (TableKind k : kAllKinds) {
    CAPTURE(to_string(k));
    const MetricsReport r = run_hard_distribution(small(k, 300, 600));
    CHECK(r.updates == 1200);
    CHECK(r.audit_checks == 1200);
    CHECK(r.audit_failures == 0);
    CHECK(r.oblivious_checks > 0);
    CHECK(r.oblivious_failures == 0);
    CHECK(r.windows.size() == 8);
    CHECK(r.windows.back().ops == 1200);
    CHECK(r.mean_probe_complexity >= 1.0);
    CHECK(r.p50 <= r.p90);
    CHECK(r.p99 <= r.max_probe);
  }
}

TEST_CASE("adapters keep invariants and slot accounting") {
  for (TableKind k : kAllKinds) {
    CAPTURE(to_string(k));
    auto t = make_table({k, 200, 0.0625, 3});
    const auto keys = testsupport::fresh_keys(11, 200);
    t->build(keys);
    CHECK(t->size() == 200);
    CHECK(t->check().empty());
    const auto s = t->slots();
    CHECK(s.size() == t->slot_count());
    const auto empties = static_cast<uint64_t>(std::count(s.begin(), s.end(), kEmpty));
    CHECK(empties == t->slot_count() - 200);
    CHECK(empties <= t->empty_allowance());
    for (uint64_t key : keys) {
      const QueryResult q = t->query(key);
      REQUIRE(q.found);
      CHECK(t->probe_complexity(key) == q.probes);
    }
    CHECK_THROWS_AS(t->probe_complexity(keys[0] ^ 0x5555), KeyError);
    CHECK_FALSE(t->query(keys[0] ^ 0x5555).found);
  }
}

TEST_CASE("sampled probe complexity matches the direct average on small tables") {
  WorkloadSpec w = small(TableKind::Tree, 256, 0);
  w.probe_sample = 4096;
  const MetricsReport r = run_hard_distribution(w);
  CHECK(r.updates == 0);
  CHECK(r.windows.empty());

  // Same key stream as the harness: nonzero, not a tombstone, distinct.
  Rng rng(derive_master(w.table.seed, static_cast<uint64_t>(Domain::Workload)));
  std::vector<uint64_t> keys;
  std::unordered_set<uint64_t> seen;
  while (keys.size() < 256) {
    const uint64_t k = rng.next();
    if (k != kEmpty && k != ~uint64_t{0} && seen.insert(k).second) keys.push_back(k);
  }
  auto t = make_table(w.table);
  t->build(keys);
  double sum = 0;
  for (uint64_t k : keys) sum += static_cast<double>(t->probe_complexity(k));
  CHECK(r.mean_probe_complexity == doctest::Approx(sum / 256.0));
  CHECK(r.mean_probe_complexity >= 1.0);
  CHECK(r.oblivious_checks == 256);
}

TEST_CASE("zero pairs reports the build") {
  const MetricsReport r = run_hard_distribution(small(TableKind::Epsilon, 500, 0));
  CHECK(r.updates == 0);
  CHECK(r.mean_moves == 0.0);
  CHECK(r.levels == 1);
  CHECK(r.level_histogram.size() == 2);
  CHECK(std::accumulate(r.level_histogram.begin(), r.level_histogram.end(), uint64_t{0}) == 500);
}

TEST_CASE("reports are deterministic per seed") {
  const auto w = small(TableKind::Epsilon, 400, 300);
  CHECK(run_hard_distribution(w) == run_hard_distribution(w));
  auto other = w;
  other.table.seed = 8;
  CHECK_FALSE(run_hard_distribution(w) == run_hard_distribution(other));
}

TEST_CASE("csv and json emitters") {
  CHECK(to_csv({}) == csv_header());
  const std::string header = csv_header();
  const auto cols = std::count(header.begin(), header.end(), ',');
  const MetricsReport r = run_hard_distribution(small(TableKind::Linear, 200, 100));
  const std::string row = csv_row(r);
  CHECK(std::count(row.begin(), row.end(), ',') == cols);
  CHECK(row.back() == '\n');
  const auto back = reports_from_json(to_json({r, r}));
  REQUIRE(back.size() == 2);
  CHECK(back[0] == r);
  CHECK(to_json(back) == to_json({r, r}));
  CHECK(windows_csv(r).find("table,n,epsilon,ops") == 0);
}

TEST_CASE("line fit") {
  const LineFit f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(f.a == doctest::Approx(1.0));
  CHECK(f.b == doctest::Approx(2.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  const LineFit flat = fit_line({1, 2, 3}, {5, 5, 5});
  CHECK(flat.b == doctest::Approx(0.0));
  CHECK(flat.flat_residual == doctest::Approx(0.0));
  CHECK_THROWS_AS(fit_line({1}, {1}), ContractError);
}

TEST_CASE("slot edit distance") {
  CHECK(slot_edit_distance({1, 2, 0}, {1, 2, 0}) == 0);
  CHECK(slot_edit_distance({1, 2, 0}, {2, 1, 0}) == 2);
  CHECK(slot_edit_distance({1, 2, 0}, {1, 0, 3}) == 1);
  CHECK(slot_edit_distance({1, 2}, {1, 2, 5}) == 1);
}

TEST_CASE("pinned reports") {
  struct Pin {
    const char* file;
    TableKind kind;
    uint64_t n;
    double epsilon;
    uint64_t pairs;
    uint64_t seed;
  };
  const Pin pins[] = {
      {"rainbow_n1024.csv", TableKind::Epsilon, 1024, 1.0 / 16, 2048, 1},
      {"linear_n1024.csv", TableKind::Linear, 1024, 1.0 / 16, 2048, 1},
      {"rainbow_n20000_eps4.csv", TableKind::Epsilon, 20000, 0.25, 2000, 3},
      {"tree_n4096.csv", TableKind::Tree, 4096, 1.0 / 16, 4096, 2},
  };
  for (const Pin& p : pins) {
    CAPTURE(p.file);
    WorkloadSpec w;
    w.table = {p.kind, p.n, p.epsilon, p.seed};
    w.pairs = p.pairs;
    const std::string want = read_file(std::string(RAINBOW_GOLDEN_DIR) + "/" + p.file);
    REQUIRE_FALSE(want.empty());
    CHECK(to_csv({run_hard_distribution(w)}) == want);
    CHECK(to_csv({run_hard_distribution(w)}) == want);
  }
}
