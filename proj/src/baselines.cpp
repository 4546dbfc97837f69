#include "rainbow/baselines.hpp"

#include <cmath>
#include <unordered_set>

#include "rainbow/errors.hpp"
#include "rainbow/resizer.hpp"

namespace rainbow {

namespace {
constexpr uint64_t kUniformRounds = 4;  // random probes per slot before the sweep
}

ProbingTable::ProbingTable(ProbeKind kind, uint64_t capacity, uint64_t seed, double epsilon)
    : kind_(kind), seed_(seed_for(seed, Domain::BaselineProbe)), epsilon_(epsilon), slots_(capacity, kEmpty) {
  require(capacity >= 1, "ProbingTable: capacity must be positive");
  require(epsilon > 0.0 && epsilon < 1.0, "ProbingTable: epsilon must lie in (0, 1)");
}

uint64_t ProbingTable::sequence_length() const {
  const uint64_t n = slots_.size();
  return kind_ == ProbeKind::Linear ? n : (kUniformRounds + 1) * n;
}

uint64_t ProbingTable::probe_at(uint64_t key, uint64_t j) const {
  const uint64_t n = slots_.size();
  if (kind_ == ProbeKind::Linear) return (uniform_below(seed_, key, n) + j) % n;
  if (j < kUniformRounds * n) return reduce_range(mix64_stream(seed_, key, j), n);
  return j - kUniformRounds * n;
}

std::vector<uint64_t> ProbingTable::probe_sequence(uint64_t key, uint64_t limit) const {
  std::vector<uint64_t> out;
  const uint64_t len = std::min(limit, sequence_length());
  out.reserve(std::min<uint64_t>(len, 1 << 20));
  for (uint64_t j = 0; j < len; ++j) out.push_back(probe_at(key, j));
  return out;
}

QueryResult ProbingTable::query(uint64_t key, std::vector<uint64_t>* log) const {
  QueryResult res;
  if (key == kEmpty || key == kTombstone) return res;
  const uint64_t len = sequence_length();
  for (uint64_t j = 0; j < len; ++j) {
    const uint64_t s = probe_at(key, j);
    ++res.probes;
    if (log) log->push_back(s);
    if (slots_[s] == key) {
      res.found = true;
      res.slot = s;
      return res;
    }
    if (slots_[s] == kEmpty) return res;
  }
  return res;
}

uint64_t ProbingTable::probe_complexity(uint64_t key) const {
  const QueryResult q = query(key);
  return q.found ? q.probes : 0;
}

void ProbingTable::place(uint64_t key, OpReceipt& r) {
  const uint64_t len = sequence_length();
  for (uint64_t j = 0; j < len; ++j) {
    const uint64_t s = probe_at(key, j);
    ++r.probes;
    ++r.wall_steps;
    if (slots_[s] == kEmpty || slots_[s] == kTombstone) {
      if (slots_[s] == kTombstone) --tombstones_;
      slots_[s] = key;
      r.record(key, kNoSlot, s);
      ++size_;
      return;
    }
  }
  throw CapacityError("probing table has no free slot");
}

OpReceipt ProbingTable::rebuild(const std::vector<uint64_t>& keys) {
  const std::vector<uint64_t> before = slots_;
  std::fill(slots_.begin(), slots_.end(), kEmpty);
  size_ = 0;
  tombstones_ = 0;
  OpReceipt scratch;
  for (uint64_t k : keys) place(k, scratch);
  std::vector<uint64_t> old = before;
  for (auto& k : old)
    if (k == kTombstone) k = kEmpty;
  OpReceipt r = diff_receipt(old, slots_);
  r.probes = scratch.probes;
  r.wall_steps = scratch.wall_steps + before.size();
  r.rebuilds.push_back({0, slots_.size(), "tombstones"});
  ++rebuilds_;
  return r;
}

OpReceipt ProbingTable::build(const std::vector<uint64_t>& keys) {
  require(keys.size() <= slots_.size(), "build: more keys than slots");
  std::unordered_set<uint64_t> seen(keys.begin(), keys.end());
  require(seen.size() == keys.size(), "build: keys must be distinct");
  require(!seen.count(kEmpty) && !seen.count(kTombstone), "build: reserved key value");
  std::fill(slots_.begin(), slots_.end(), kEmpty);
  size_ = 0;
  tombstones_ = 0;
  OpReceipt r;
  for (uint64_t k : keys) place(k, r);
  return r;
}

OpReceipt ProbingTable::insert(uint64_t key) {
  require(key != kEmpty && key != kTombstone, "insert: reserved key value");
  const QueryResult q = query(key);
  if (q.found) throw KeyError("insert: key already present");
  if (size_ >= slots_.size()) throw CapacityError("insert: table is full");
  OpReceipt r;
  r.probes += q.probes;
  place(key, r);
  return r;
}

OpReceipt ProbingTable::erase(uint64_t key) {
  const QueryResult q = query(key);
  if (!q.found) throw KeyError("erase: key not present");
  OpReceipt r;
  r.probes = q.probes;
  slots_[q.slot] = kTombstone;
  r.record(key, q.slot, kNoSlot);
  ++r.wall_steps;
  --size_;
  ++tombstones_;
  if (static_cast<double>(tombstones_) > epsilon_ * static_cast<double>(slots_.size()) / 2.0) {
    OpReceipt rb = rebuild(keys());
    r.absorb(rb);
  }
  return r;
}

std::vector<uint64_t> ProbingTable::keys() const {
  std::vector<uint64_t> out;
  out.reserve(size_);
  for (uint64_t k : slots_)
    if (k != kEmpty && k != kTombstone) out.push_back(k);
  return out;
}

ProbingReport ProbingTable::check() const {
  ProbingReport rep;
  std::unordered_set<uint64_t> seen;
  uint64_t n = 0;
  for (uint64_t s = 0; s < slots_.size(); ++s) {
    const uint64_t k = slots_[s];
    if (k == kTombstone) {
      ++rep.tombstones;
      continue;
    }
    if (k == kEmpty) continue;
    ++n;
    if (!seen.insert(k).second) rep.violations.push_back("key stored twice");
    const QueryResult q = query(k);
    if (!q.found || q.slot != s) rep.violations.push_back("key unreachable along its probe sequence at " + std::to_string(s));
  }
  if (n != size_) rep.violations.push_back("cached size disagrees with the array");
  if (rep.tombstones != tombstones_) rep.violations.push_back("cached tombstone count disagrees with the array");
  return rep;
}

void ProbingTable::adopt(const std::vector<uint64_t>& slots) {
  require(slots.size() == slots_.size(), "adopt: array length differs from the capacity");
  slots_ = slots;
  size_ = 0;
  tombstones_ = 0;
  for (uint64_t k : slots_) {
    if (k == kTombstone) ++tombstones_;
    else if (k != kEmpty) ++size_;
  }
}

}  // namespace rainbow
