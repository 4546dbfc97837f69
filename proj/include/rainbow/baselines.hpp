#pragma once
/**
 * Baseline open-addressed tables with tombstone deletion: linear probing
 * (consecutive slots from a seeded start) and uniform probing (a seeded
 * pseudo-random stream per key, followed by a sweep of every slot so the
 * sequence always covers the table).
 *
 * Deletions leave a tombstone; once tombstones exceed epsilon * N / 2 the
 * table is rebuilt from its live keys.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "rainbow/hash_suite.hpp"
#include "rainbow/rainbow_tree.hpp"
#include "rainbow/receipt.hpp"

namespace rainbow {

constexpr uint64_t kTombstone = ~uint64_t{0};

enum class ProbeKind { Linear, Uniform };

struct ProbingReport {
  std::vector<std::string> violations;
  uint64_t tombstones = 0;
  bool ok() const { return violations.empty(); }
};

class ProbingTable {
 public:
  ProbingTable(ProbeKind kind, uint64_t capacity, uint64_t seed, double epsilon);

  OpReceipt build(const std::vector<uint64_t>& keys);
  OpReceipt insert(uint64_t key);
  OpReceipt erase(uint64_t key);

  QueryResult query(uint64_t key, std::vector<uint64_t>* log = nullptr) const;
  bool contains(uint64_t key) const { return query(key).found; }
  std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit = kNoSlot) const;
  uint64_t probe_complexity(uint64_t key) const;

  ProbeKind kind() const { return kind_; }
  uint64_t size() const { return size_; }
  uint64_t capacity() const { return slots_.size(); }
  uint64_t tombstones() const { return tombstones_; }
  uint64_t rebuilds() const { return rebuilds_; }
  // Raw array; tombstones appear as kTombstone.
  const std::vector<uint64_t>& slots() const { return slots_; }
  std::vector<uint64_t> keys() const;
  ProbingReport check() const;
  void adopt(const std::vector<uint64_t>& slots);

 private:
  uint64_t sequence_length() const;
  uint64_t probe_at(uint64_t key, uint64_t j) const;
  OpReceipt rebuild(const std::vector<uint64_t>& keys);
  void place(uint64_t key, OpReceipt& r);

  ProbeKind kind_;
  HashSeed seed_;
  double epsilon_;
  std::vector<uint64_t> slots_;
  uint64_t size_ = 0;
  uint64_t tombstones_ = 0;
  uint64_t rebuilds_ = 0;
};

}  // namespace rainbow
