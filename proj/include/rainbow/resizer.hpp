#pragma once
/**
 * Rainbow table kept at load factor 1 while the key count changes.
 *
 * Every insert appends one leaf slot and every delete removes one, so the
 * table always spans exactly size() slots. The colour distribution is frozen
 * at an anchor N; when n crosses one of the random thresholds
 * N_i = floor(1.09^i * r * base), the whole table is rebuilt at anchor N_i.
 * r in (0.99, 1) is drawn once from the seed.
 */

#include <cstdint>
#include <optional>
#include <vector>

#include "rainbow/rainbow_tree.hpp"

namespace rainbow {

// Random thresholds N_i = floor(1.09^i * r * base), i >= 0.
class ThresholdSchedule {
 public:
  ThresholdSchedule(uint64_t base, uint64_t seed);
  uint64_t base() const { return base_; }
  double r() const { return r_; }
  uint64_t threshold(int i) const;
  // Largest i with N_i < n (0 when n <= N_1); throws below N_0.
  int index_for(uint64_t n) const;

 private:
  uint64_t base_;
  double r_;
};

class ResizableTree {
 public:
  ResizableTree(uint64_t base, uint64_t seed, TreeOptions options = {});

  // n = keys.size() must be at least min_size().
  OpReceipt build(const std::vector<uint64_t>& keys);
  // Geometry-only table with no keys: probe sequences are available, the
  // array is all empty and no update is allowed until the next build().
  void shell(uint64_t capacity);
  bool is_shell() const { return shell_; }

  OpReceipt grow_insert(uint64_t key);
  OpReceipt shrink_delete(uint64_t key);
  // Rebuild at the anchor for new_n when it differs from the current one.
  bool maybe_anchor_rebuild(uint64_t new_n);

  QueryResult query(uint64_t key, std::vector<uint64_t>* log = nullptr) const { return tree_.query(key, log); }
  bool contains(uint64_t key) const { return !shell_ && tree_.contains(key); }
  std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit = kNoSlot) const {
    return tree_.probe_sequence(key, limit);
  }

  uint64_t size() const { return tree_.size(); }
  uint64_t capacity() const { return tree_.capacity(); }
  uint64_t anchor() const { return tree_.anchor(); }
  uint64_t base() const { return sched_.base(); }
  uint64_t seed() const { return seed_; }
  double r() const { return sched_.r(); }
  uint64_t threshold(int i) const { return sched_.threshold(i); }
  int threshold_index() const { return index_; }
  int index_for(uint64_t n) const { return sched_.index_for(n); }
  uint64_t min_size() const { return threshold(0); }
  uint64_t anchor_rebuilds() const { return anchor_rebuilds_; }

  const RainbowTree& tree() const { return tree_; }
  RainbowTree& tree() { return tree_; }
  const std::vector<uint64_t>& slots() const { return tree_.slots(); }
  std::vector<uint64_t> keys() const;

  TreeReport check() const;
  // Snapshot load: `slots` is the full array, the anchor follows from its size.
  void adopt(const std::vector<uint64_t>& slots);

 private:
  RainbowTree make_tree(int index) const;
  OpReceipt rebuild_all(std::vector<uint64_t> keys);

  ThresholdSchedule sched_;
  uint64_t seed_;
  TreeOptions opt_;
  int index_ = 0;
  bool shell_ = false;
  uint64_t anchor_rebuilds_ = 0;
  RainbowTree tree_;
};

// Receipt for replacing `before` by `after` wholesale: one move per key whose
// slot changed, erasures for keys that left, placements for new keys.
OpReceipt diff_receipt(const std::vector<uint64_t>& before, const std::vector<uint64_t>& after);

}  // namespace rainbow
