#pragma once
/**
 * Rainbow cell: a table over b slots kept at (or one slot below) full load.
 *
 * The cell is split into num_buckets buckets of bucket_size slots; the last
 * sky_size slots of each bucket are sky slots. A key is heavy with
 * probability 1 - sky/(2*bucket) and then belongs in bucket h(x); light keys
 * may sit in any sky slot. Whether the cell is in full failure is written
 * into the array as the order of the last two keys of every bucket, and
 * mirrored in a cached flag.
 *
 * Below the rainbow threshold the cell degrades to a flat region scanned in
 * full by every query.
 *
 * The cell does not own its storage: it addresses a window of a vector owned
 * by the enclosing table. All slot numbers in receipts are global.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "rainbow/hash_suite.hpp"
#include "rainbow/receipt.hpp"

namespace rainbow {

constexpr uint64_t kDefaultCellThreshold = 256;

struct CellParams {
  uint64_t size = 0;
  uint64_t num_buckets = 1;
  uint64_t bucket_size = 0;
  uint64_t sky_size = 0;
  bool flat = true;

  static CellParams make(uint64_t b, uint64_t rainbow_threshold = kDefaultCellThreshold);

  uint64_t light_num() const { return sky_size; }
  uint64_t light_den() const { return 2 * bucket_size; }
  bool is_sky(uint64_t local) const { return local % bucket_size >= bucket_size - sky_size; }
  bool is_designated(uint64_t local) const { return local % bucket_size >= bucket_size - 2; }
  uint64_t bucket_of_slot(uint64_t local) const { return local / bucket_size; }
};

struct CellScan {
  bool found = false;
  uint64_t local = kNoSlot;
  bool failure_seen = false;  // primary region finished and showed full failure
};

struct CellReport {
  std::vector<std::string> violations;
  uint64_t out_of_range_buckets = 0;
  uint64_t unfriendly_buckets = 0;  // heavy count outside the update-friendly band
  bool encoded_failure = false;
  bool cached_failure = false;
  bool ok() const { return violations.empty(); }
  bool update_friendly() const { return out_of_range_buckets == 0 && unfriendly_buckets == 0; }
};

class RainbowCell {
 public:
  RainbowCell() = default;
  RainbowCell(std::vector<uint64_t>* array, uint64_t offset, CellParams params, uint64_t master);

  const CellParams& params() const { return p_; }
  uint64_t offset() const { return off_; }
  uint64_t size() const { return p_.size; }
  uint64_t count() const { return count_; }
  uint64_t holes() const { return p_.size - count_; }
  bool failed() const { return failed_; }
  uint64_t at(uint64_t local) const { return (*arr_)[off_ + local]; }
  void rebind(std::vector<uint64_t>* array) { arr_ = array; }
  // Recompute every cache from the window contents (snapshot loads).
  void adopt();

  bool heavy(uint64_t key) const;
  uint64_t bucket(uint64_t key) const;

  // Lay out `keys` (all distinct, at most size()) from scratch.
  void init(const std::vector<uint64_t>& keys, OpReceipt& r);
  // Remove the key at a local slot and restore the layout rules.
  void remove_at(uint64_t local, OpReceipt& r);
  // Store a key in one of the holes; requires holes() > 0.
  void place(uint64_t key, OpReceipt& r);
  // Remove + place, the paired update of the cell on its own.
  void update(uint64_t local, uint64_t key, OpReceipt& r);

  // Batch interface used by rebuilds: lift keys out without repair, then add
  // a batch and re-lay out keeping kept keys where they are legal.
  void lift(uint64_t local, OpReceipt& r);
  void absorb(const std::vector<uint64_t>& incoming, OpReceipt& r);
  // Exchange two slots of a flat cell (either may be empty).
  void swap_local(uint64_t a, uint64_t b, OpReceipt& r);

  // Region scanned first by a query; the full cell follows in the sequence.
  void primary(uint64_t key, std::vector<uint64_t>& out) const;
  CellScan scan_primary(uint64_t key, uint64_t& probes, std::vector<uint64_t>* log) const;
  // Stand-alone query: primary region, then the whole cell on failure.
  CellScan query(uint64_t key, uint64_t& probes, std::vector<uint64_t>* log) const;
  std::vector<uint64_t> probe_sequence(uint64_t key) const;

  CellReport check() const;
  // Heavy count per bucket (keys whose bucket is j, wherever they sit).
  const std::vector<uint64_t>& heavy_counts() const { return heavy_; }

 private:
  uint64_t& slot(uint64_t local) { return (*arr_)[off_ + local]; }
  bool in_range(uint64_t h) const;
  void count_in(uint64_t key, int delta);
  void move_local(uint64_t from, uint64_t to, OpReceipt& r);
  void after_change(OpReceipt& r);
  void settle_hole(uint64_t hole, OpReceipt& r);
  void write_bit(uint64_t bucket, bool value, OpReceipt& r);
  bool read_bit(uint64_t bucket) const;
  uint64_t find_in_sky(uint64_t bucket, bool want_light, bool non_designated_only, OpReceipt& r);
  void relayout(OpReceipt& r);
  void failure_layout(OpReceipt& r);
  void forget_hole(uint64_t local);

  std::vector<uint64_t>* arr_ = nullptr;
  uint64_t off_ = 0;
  CellParams p_{};
  uint64_t master_ = 0;
  HashSeed status_seed_{}, bucket_seed_{};
  uint64_t count_ = 0;
  std::vector<uint64_t> heavy_;
  uint64_t bad_ = 0;
  bool failed_ = false;
  std::vector<uint64_t> holes_;
  Rng rng_{0};
};

}  // namespace rainbow
