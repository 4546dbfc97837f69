#pragma once
/**
 * Rainbow hash table at load factor 1.
 *
 * The array is cut into the buffers of a recursion tree (see geometry.hpp);
 * every buffer of level >= 2 is a RainbowCell and every level-1 subproblem is
 * a single slot. Each key draws a colour (a level >= 2) and a node of that
 * level. Keys live in the buffer of their node or of one of its children,
 * except inside subtrees whose counts make that layout impossible; there the
 * query falls back to scanning whole subtrees.
 *
 * Between operations the table is either full or holds exactly one free slot
 * in the root buffer: erase() leaves the free slot there and insert() uses it.
 * grow()/shrink() change the number of leaves by one for the resizer.
 *
 * Feasibility flags and subtree counts are caches: they are a function of the
 * array and the seed, and check() recomputes them.
 */

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rainbow/geometry.hpp"
#include "rainbow/hash_suite.hpp"
#include "rainbow/rainbow_cell.hpp"
#include "rainbow/receipt.hpp"

namespace rainbow {

struct NodeRef {
  int level = 0;
  uint64_t index = 0;
  bool operator==(const NodeRef&) const = default;
};

struct TreeOptions {
  GeometryParams geometry{};
  uint64_t cell_threshold = kDefaultCellThreshold;
};

struct QueryResult {
  bool found = false;
  uint64_t slot = kNoSlot;
  uint64_t probes = 0;
};

struct TreeReport {
  std::vector<std::string> violations;
  uint64_t empty_slots = 0;
  uint64_t infeasible_nodes = 0;  // nodes that are not strongly feasible
  uint64_t failed_cells = 0;
  bool ok() const { return violations.empty(); }
};

class RainbowTree {
 public:
  // `anchor` fixes the schedule and the colour distribution; the live
  // capacity starts equal to it and moves only through grow()/shrink().
  RainbowTree(uint64_t anchor, uint64_t seed, TreeOptions options = {});
  RainbowTree(const RainbowTree&) = delete;
  RainbowTree& operator=(const RainbowTree&) = delete;
  RainbowTree(RainbowTree&&) = default;
  RainbowTree& operator=(RainbowTree&&) = default;

  // Lay out `keys` from scratch; size must be capacity() or capacity() - 1
  // (the latter leaves the free slot in the root buffer).
  OpReceipt build(const std::vector<uint64_t>& keys);
  // Drop every key and set the live capacity (anchor geometry kept).
  void reset_capacity(uint64_t capacity);
  // Replace the array wholesale (snapshot load) and recompute all caches.
  void adopt(const std::vector<uint64_t>& slots);

  QueryResult query(uint64_t key, std::vector<uint64_t>* log = nullptr) const;
  bool contains(uint64_t key) const { return query(key).found; }
  // Static probe sequence, truncated to `limit` entries.
  std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit = kNoSlot) const;
  // Position of the key in its probe sequence (1-based); 0 when absent.
  uint64_t probe_complexity(uint64_t key) const;

  // Requires a free slot. Throws KeyError on duplicates.
  OpReceipt insert(uint64_t key);
  // Requires a full table. Leaves the free slot in the root buffer.
  OpReceipt erase(uint64_t key);

  // Resizer hooks. grow() appends a leaf slot and moves the resulting free
  // slot to the root buffer; it requires a full table. shrink() drops the
  // last leaf slot and requires the free slot in the root buffer; the key it
  // held (if any) is reinserted.
  OpReceipt grow();
  OpReceipt shrink();
  // erase() followed by shrink(), except that a key sitting in the last leaf
  // slot is simply dropped together with its slot.
  OpReceipt erase_shrink(uint64_t key);

  // Up to b random probes of the buffer, then a scan. `color` must be the
  // node's level or the next one; returns a key of that colour hashing to the
  // node or its parent respectively.
  std::optional<uint64_t> sample(NodeRef node, int color, OpReceipt& r);
  void rebuild(NodeRef node, OpReceipt& r);
  // Exchange two slots of the root buffer; the root must be a flat cell.
  void swap_in_root(uint64_t a, uint64_t b, OpReceipt& r);
  // Local index of the free slot within the root buffer, if any.
  std::optional<uint64_t> root_free_slot() const;

  TreeReport check() const;

  // Hashing.
  int color_of(uint64_t key) const;
  NodeRef node_of(uint64_t key) const;

  // Structure.
  const TreeGeometry& geometry() const { return g_; }
  const ColorDistribution& colors() const { return colors_; }
  uint64_t seed() const { return seed_; }
  uint64_t anchor() const { return anchor_; }
  uint64_t capacity() const { return g_.capacity(); }
  uint64_t size() const { return size_; }
  bool has_free_slot() const { return size_ < capacity(); }
  const std::vector<uint64_t>& slots() const { return *arr_; }
  NodeRef root() const { return {g_.levels(), 0}; }
  NodeRef parent(NodeRef v) const { return {v.level + 1, v.index % g_.m(v.level + 1)}; }
  NodeRef ancestor(NodeRef v, int level) const { return {level, v.index % g_.m(level)}; }
  std::vector<NodeRef> children(NodeRef v) const;
  uint64_t subtree_slots(NodeRef v) const { return g_.subtree_size(v.level, v.index); }
  uint64_t subtree_keys(NodeRef v) const;  // cached q: keys hashing into the subtree
  bool weakly_feasible(NodeRef v) const;
  bool strongly_feasible(NodeRef v) const;
  const RainbowCell& cell(NodeRef v) const { return cells_.at(v.level).at(v.index); }
  TreeOptions options() const { return opt_; }

 private:
  uint64_t node_id(NodeRef v) const;
  uint64_t buffer_begin(NodeRef v) const;
  uint64_t buffer_size(NodeRef v) const { return v.level == 1 ? 1 : g_.b(v.level); }
  NodeRef owner(uint64_t slot) const;
  bool window_ok(NodeRef v) const;

  void make_cells();
  void recount();
  void set_window(NodeRef v);
  void bump(NodeRef target, int delta);
  void refresh_path(NodeRef leaf_or_node);
  std::vector<char> path_strong(NodeRef v) const;
  std::optional<NodeRef> highest_change(NodeRef v, const std::vector<char>& before) const;

  uint64_t at(NodeRef v, uint64_t local) const { return (*arr_)[buffer_begin(v) + local]; }
  void remove_from(NodeRef v, uint64_t local, OpReceipt& r);
  void place_into(NodeRef v, uint64_t key, OpReceipt& r);
  void move_between(NodeRef from, uint64_t local, NodeRef to, OpReceipt& r);
  std::optional<uint64_t> sample_local(NodeRef v, NodeRef want, OpReceipt& r);
  void insert_walk(uint64_t key, std::optional<NodeRef> changed, OpReceipt& r);

  void float_hole(NodeRef at_node, std::vector<NodeRef> rebuild_tops, OpReceipt& r);
  void rebuild_with(NodeRef node, const std::vector<uint64_t>& loose, OpReceipt& r);
  bool scan_range(uint64_t begin, uint64_t len, uint64_t key, uint64_t& probes, std::vector<uint64_t>* log,
                  uint64_t& where) const;
  void append_subtree(NodeRef v, std::vector<uint64_t>& out, uint64_t limit) const;

  TreeOptions opt_;
  uint64_t seed_ = 0;
  uint64_t anchor_ = 0;
  TreeGeometry g_;
  ColorDistribution colors_;
  HashSeed color_seed_{}, node_seed_{};
  std::unique_ptr<std::vector<uint64_t>> arr_;
  std::vector<std::vector<RainbowCell>> cells_;  // by level; levels 0 and 1 empty
  std::vector<std::vector<uint64_t>> q_;         // keys hashing into each subtree
  std::vector<std::vector<char>> win_;           // window_ok cache
  std::vector<std::vector<uint32_t>> bad_kids_;  // children with a failed window
  uint64_t size_ = 0;
  std::optional<NodeRef> hole_;  // node whose buffer holds the free slot
  Rng rng_{0};
};

// Weak-feasibility of a node from a census of keys, two ways. Both use only
// the geometry and the multiset of keys' hashed nodes.
struct FeasibilityCensus {
  TreeGeometry geometry;
  std::vector<std::vector<uint64_t>> own;  // own[level][index]: keys hashing exactly there
  static FeasibilityCensus from_keys(const RainbowTree& t, const std::vector<uint64_t>& keys);
  uint64_t subtree_keys(NodeRef v) const;
};
bool weakly_feasible_by_counting(const FeasibilityCensus& c, NodeRef s);
bool weakly_feasible_by_matching(const FeasibilityCensus& c, NodeRef s);

}  // namespace rainbow
