#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace rainbow {

constexpr uint64_t kNoSlot = std::numeric_limits<uint64_t>::max();
constexpr uint64_t kEmpty = 0;  // keys are nonzero

// One relocation. from == kNoSlot places a key that was not stored;
// to == kNoSlot takes a key out of the array.
struct Move {
  uint64_t key;
  uint64_t from;
  uint64_t to;
};

struct RebuildEvent {
  int level;       // 0 for a whole-structure rebuild
  uint64_t size;   // slots covered
  std::string scope;
};

/**
 * Per-operation accounting.
 *
 * The trail holds elementary moves in the order they happened. net_moves()
 * composes them per key (first origin, last destination), drops keys that
 * ended where they started, and drops keys that left the array; its length is
 * the switching cost of the operation. Applying the net moves simultaneously
 * to the pre-state array, then clearing the erased slots, yields the post-state.
 */
struct OpReceipt {
  uint64_t probes = 0;
  uint64_t wall_steps = 0;
  bool fallback = false;
  std::vector<Move> trail;
  std::vector<RebuildEvent> rebuilds;

  void record(uint64_t key, uint64_t from, uint64_t to) { trail.push_back({key, from, to}); }
  std::vector<Move> net_moves() const;
  // Keys whose final destination is outside the array, with their origin slot.
  std::vector<Move> erased() const;
  uint64_t moves() const { return net_moves().size(); }
  void absorb(const OpReceipt& other);
};

}  // namespace rainbow
