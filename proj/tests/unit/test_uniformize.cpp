#include <doctest.h>

#include <cmath>

#include "rainbow/errors.hpp"
#include "rainbow/uniformize.hpp"

using namespace rainbow;

namespace {

constexpr uint64_t kU = 1 << 14, kN = 256, kLen = 32, kKeys = 128;

}  // namespace

TEST_CASE("families produce valid sequences") {
  for (auto fam : {ProbeFamily::Permutation, ProbeFamily::Linear, ProbeFamily::DoubleHash, ProbeFamily::SkewedFirst,
                   ProbeFamily::SlotZeroFirst, ProbeFamily::Identity, ProbeFamily::HotSet}) {
    CAPTURE(to_string(fam));
    CHECK(parse_probe_family(to_string(fam)) == fam);
    const ProbeFunction h = make_probe_function(fam, 1000, kN, kLen, 3);
    REQUIRE(h.table.size() == 1000 * kLen);
    for (uint32_t s : h.table) CHECK(s < kN);
    CHECK(make_probe_function(fam, 1000, kN, kLen, 3).table == h.table);
  }
  CHECK(make_probe_function(ProbeFamily::SlotZeroFirst, 10, kN, 4, 1).at(7, 0) == 0);
  CHECK(make_probe_function(ProbeFamily::Identity, 10, kN, 4, 1).at(7, 3) == 3);
  CHECK_THROWS_AS(make_probe_function(ProbeFamily::Permutation, kMaxUniverse + 1, kN, kLen, 1), ContractError);
  CHECK_THROWS_AS(make_probe_function(ProbeFamily::Permutation, 10, kN, kN, 1), ContractError);
}

TEST_CASE("prefix counts by enumeration") {
  // Two keys over 8 slots: [1, 2, 1, 3] and [2, 4, 5, 6].
  FlatSequences f;
  f.offset = {0, 4, 8};
  f.slot = {1, 2, 1, 3, 2, 4, 5, 6};
  f.gpos = {1, 2, 3, 4, 1, 2, 3, 4};
  const auto cnt = prefix_counts(f, 8, 4);
  CHECK(cnt[1][1] == 1);
  CHECK(cnt[1][2] == 1);
  CHECK(cnt[2][2] == 2);
  CHECK(cnt[3][1] == 1);  // a repeat is not a new occurrence
  CHECK(cnt[4][3] == 1);
  CHECK(cnt[4][6] == 1);
  CHECK(cnt[4][0] == 0);
}

TEST_CASE("uniform input needs no reassignment") {
  const ProbeFunction h = make_probe_function(ProbeFamily::Permutation, kU, kN, kLen, 5);
  const UniformizeResult u = uniformize(h, kKeys, 32);
  CHECK(u.bad_pairs == 0);
  CHECK(u.moved == 0);
  CHECK(u.flat.slot == h.table);
  CHECK(certify(h, u, kKeys, 32, 10, 1).ok());
}

TEST_CASE("slot zero first is pushed to ceil(sqrt(n))") {
  const ProbeFunction h = make_probe_function(ProbeFamily::SlotZeroFirst, kU, kN, kLen, 5);
  const UniformizeResult u = uniformize(h, kKeys, 32);
  const uint32_t want = static_cast<uint32_t>(std::ceil(std::sqrt(static_cast<double>(kKeys))));  // 12
  CHECK(u.moved >= kU);
  for (uint64_t x = 0; x < kU; x += 97) {
    CHECK(u.flat.slot[u.flat.offset[x]] == ProbeFunction::kNull);
    uint32_t g = 0;
    for (uint64_t k = u.flat.offset[x]; k < u.flat.offset[x + 1]; ++k)
      if (u.flat.slot[k] == 0) g = u.flat.gpos[k];
    CHECK(g == want);
  }
  const Certification c = certify(h, u, kKeys, 32, 20, 2);
  CHECK(c.ok());
  CHECK(c.shift_checks > 0);
}

TEST_CASE("identity sequences are certified") {
  const ProbeFunction h = make_probe_function(ProbeFamily::Identity, kU, kN, kLen, 5);
  const UniformizeResult u = uniformize(h, kKeys, 32);
  // q(h, i, s) = n for s < i, bad while n > i^5: i in {1, 2}.
  CHECK(u.bad_pairs == 1 + 2);
  const Certification c = certify(h, u, kKeys, 32, 20, 2);
  CHECK(c.ok());
  CHECK(c.worst_tilde_excess > 0);
}

TEST_CASE("shift bound on every transformed family") {
  for (auto fam : {ProbeFamily::SkewedFirst, ProbeFamily::HotSet, ProbeFamily::DoubleHash}) {
    CAPTURE(to_string(fam));
    const ProbeFunction h = make_probe_function(fam, kU, kN, kLen, 9);
    const UniformizeResult u = uniformize(h, kKeys, 32);
    const Certification c = certify(h, u, kKeys, 32, 10, 4);
    CHECK(c.shift_violations == 0);
    CHECK(c.q_violations == 0);
    CHECK(c.ok());
  }
}
