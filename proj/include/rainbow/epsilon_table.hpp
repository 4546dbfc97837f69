#pragma once
/**
 * Load factor 1 - Theta(epsilon) table built from load-1 rainbow subtables.
 *
 * Keys pick a subtable i = g(x) among S = N / k. Subtable H_i is a resizable
 * rainbow table holding z_i keys; keys beyond z_i spill into an overflow
 * buffer O_i: first a linear-probing array A_i of about 2*epsilon*k slots,
 * then (only while A_i is full) a shared linear-probing array B of about
 * epsilon*N slots where every key of subtable i hashes to offset
 * floor(i * |B| / S). If O_i is non-empty then H_i is full.
 *
 * Memory map: [mode slot][B][A_0 .. A_{S-1}][H interleaved], local slot p of
 * H_i at global slot 1 + |B| + S*|A_i| + p*S + i. The H region holds
 * Z = n - ceil(epsilon * n) slots, so it changes by at most one slot per
 * update and only the last slot appears or disappears.
 *
 * An under-filled H_i keeps its local slot 0 empty; queries then scan it in
 * probe-sequence order. If B itself overflows the table enters global
 * failure: keys sit anywhere and every query ends with a full scan. The mode
 * is written into the array: slot 0 is empty in normal operation and holds a
 * key during global failure.
 *
 * Small epsilon (below 8 / sqrt(N)) or tiny tables fall back to one plain
 * resizable rainbow table.
 */

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rainbow/baselines.hpp"
#include "rainbow/resizer.hpp"

namespace rainbow {

enum class EpsilonMode { Plain, Normal, Failure };
std::string to_string(EpsilonMode m);

struct EpsilonOptions {
  double epsilon = 1.0 / 64;
  uint64_t base = 0;          // anchor schedule base; 0 means the size of the first build
  uint64_t fixed_anchor = 0;  // nonzero: anchor stays here whatever n does
  uint64_t k_override = 0;    // subtable scale; 0 derives it from epsilon
  double spill_scale = 1.0;   // multiplier on |B|
  TreeOptions tree{};
};

struct EpsilonReport {
  std::vector<std::string> violations;
  uint64_t underfilled = 0;
  uint64_t spilled = 0;  // keys in B
  uint64_t empty_slots = 0;
  bool ok() const { return violations.empty(); }
};

// Subtable scale for a given epsilon and anchor: a power of two at least
// 32 / epsilon^2, at most N / 2. Returns 0 when the plain table is used.
uint64_t subtable_scale(double epsilon, uint64_t anchor, uint64_t k_override = 0);

class EpsilonTable {
 public:
  EpsilonTable(EpsilonOptions options, uint64_t seed);
  EpsilonTable(EpsilonTable&&) = default;
  EpsilonTable& operator=(EpsilonTable&&) = default;

  OpReceipt build(const std::vector<uint64_t>& keys);
  OpReceipt insert(uint64_t key);
  OpReceipt erase(uint64_t key);

  QueryResult query(uint64_t key, std::vector<uint64_t>* log = nullptr) const;
  bool contains(uint64_t key) const { return query(key).found; }
  std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit = kNoSlot) const;
  uint64_t probe_complexity(uint64_t key) const;

  EpsilonMode mode() const { return mode_; }
  double epsilon() const { return opt_.epsilon; }
  const EpsilonOptions& options() const { return opt_; }
  uint64_t seed() const { return seed_; }
  uint64_t anchor() const { return anchor_; }
  // Base of the anchor schedule; 0 before the first build or with a fixed anchor.
  uint64_t schedule_base() const { return sched_ ? sched_->base() : 0; }
  uint64_t k() const { return k_; }
  uint64_t subtables() const { return S_; }
  uint64_t overflow_array_size() const { return a_; }
  uint64_t spill_size() const { return nb_; }
  uint64_t size() const { return n_; }
  uint64_t slot_count() const;
  double load() const { return slot_count() ? static_cast<double>(n_) / static_cast<double>(slot_count()) : 0.0; }
  double k_prime() const { return S_ ? static_cast<double>(n_) / static_cast<double>(S_) : 0.0; }
  uint64_t subtable_of(uint64_t key) const;
  uint64_t subtable_capacity(uint64_t i) const;
  // |O_i| for every subtable (empty in plain mode).
  std::vector<uint64_t> overflow_sizes() const;
  bool underfilled(uint64_t i) const { return subs_.at(i).under; }
  uint64_t anchor_rebuilds() const { return anchor_rebuilds_; }
  uint64_t failures() const { return failures_; }

  std::vector<uint64_t> slots() const;
  EpsilonReport check() const;
  // Snapshot load: array plus the anchor it was laid out for.
  void adopt(const std::vector<uint64_t>& slots, uint64_t anchor);

 private:
  struct Sub {
    ResizableTree tree;
    std::vector<uint64_t> raw;  // contents while under-filled
    bool under = false;
    uint64_t in_a = 0;
    uint64_t in_b = 0;
  };

  // Layout.
  uint64_t hbase() const { return 1 + nb_ + S_ * a_; }
  uint64_t hpos(uint64_t i, uint64_t p) const { return hbase() + p * S_ + i; }
  uint64_t apos(uint64_t i, uint64_t j) const { return 1 + nb_ + i * a_ + j; }
  uint64_t bpos(uint64_t j) const { return 1 + j; }
  uint64_t region_z(uint64_t n) const;
  uint64_t z_of(uint64_t i, uint64_t Z) const { return Z / S_ + (i < Z % S_ ? 1 : 0); }
  uint64_t home_a(uint64_t key) const;
  uint64_t home_b(uint64_t i) const { return i * nb_ / S_; }

  void configure(uint64_t anchor);
  Sub make_sub(uint64_t i) const;
  OpReceipt rebuild_all(const std::vector<uint64_t>& keys);
  bool lay_out(const std::vector<uint64_t>& keys);
  void shell_subs();
  void lay_out_failure(const std::vector<uint64_t>& keys);
  std::vector<uint64_t> all_keys() const;
  uint64_t local_at(uint64_t i, uint64_t p) const;
  uint64_t at(uint64_t global) const;

  // Overflow buffers.
  bool o_insert(uint64_t i, uint64_t key, OpReceipt& r);
  void o_remove_at(uint64_t global, OpReceipt& r);
  // Global slot of a random key of O_i (A_i only: B is used only while A_i is full).
  std::optional<uint64_t> o_sample(uint64_t i, OpReceipt& r);
  void shift_remove(bool spill, uint64_t begin, uint64_t size, uint64_t hole, OpReceipt& r);

  // Subtables.
  void absorb_local(uint64_t i, const OpReceipt& local, OpReceipt& r) const;
  void to_under(uint64_t i, std::vector<uint64_t> raw, OpReceipt& r);
  void from_under(uint64_t i, OpReceipt& r);
  void under_insert(uint64_t i, uint64_t key, OpReceipt& r);
  void grow_sub(uint64_t i, OpReceipt& r);
  bool shrink_sub(uint64_t i, OpReceipt& r);
  bool adjust_capacity(OpReceipt& r);

  // Failure mode.
  void failure_resize(OpReceipt& r);
  void try_recover(OpReceipt& r);

  // Query pieces.
  std::vector<uint64_t> o_static(uint64_t key, uint64_t limit) const;
  std::vector<uint64_t> h_static(uint64_t key, uint64_t limit) const;

  EpsilonOptions opt_;
  uint64_t seed_;
  std::optional<ThresholdSchedule> sched_;
  HashSeed g_seed_{}, a_seed_{};
  EpsilonMode mode_ = EpsilonMode::Plain;
  uint64_t anchor_ = 0;
  uint64_t k_ = 0, S_ = 0, a_ = 0, nb_ = 0;
  uint64_t n_ = 0, Z_ = 0;
  std::unique_ptr<ResizableTree> plain_;
  std::vector<Sub> subs_;
  std::vector<uint64_t> A_, B_;
  std::vector<uint64_t> fail_;
  uint64_t anchor_rebuilds_ = 0;
  uint64_t failures_ = 0;
  Rng rng_{0};
};

/**
 * Fixed-capacity table over N slots for any load up to 1 - epsilon. Below a
 * seeded threshold T in [0.9N, 0.95N] keys live in a linear-probing table;
 * above it in an epsilon-table (parameter epsilon / 4, anchor 0.95N) laid out
 * in a prefix of the N slots. Crossing T rebuilds.
 */
class FixedCapacityTable {
 public:
  enum class Mode { Linear, Epsilon };
  FixedCapacityTable(uint64_t capacity, double epsilon, uint64_t seed);

  OpReceipt build(const std::vector<uint64_t>& keys);
  OpReceipt insert(uint64_t key);
  OpReceipt erase(uint64_t key);
  QueryResult query(uint64_t key, std::vector<uint64_t>* log = nullptr) const;
  bool contains(uint64_t key) const { return query(key).found; }
  std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit = kNoSlot) const;
  uint64_t probe_complexity(uint64_t key) const;

  Mode mode() const { return mode_; }
  uint64_t threshold() const { return T_; }
  uint64_t capacity() const { return N_; }
  uint64_t max_size() const { return max_n_; }
  uint64_t size() const { return n_; }
  uint64_t mode_switches() const { return switches_; }
  const EpsilonTable* epsilon_table() const { return eps_ ? &*eps_ : nullptr; }
  std::vector<uint64_t> slots() const;
  std::vector<std::string> check() const;

 private:
  OpReceipt switch_to(Mode m, const std::vector<uint64_t>& keys);
  std::vector<uint64_t> keys() const;

  uint64_t N_;
  double epsilon_;
  uint64_t seed_;
  uint64_t T_;
  uint64_t max_n_;
  Mode mode_ = Mode::Linear;
  uint64_t n_ = 0;
  uint64_t switches_ = 0;
  ProbingTable lin_;
  std::optional<EpsilonTable> eps_;
};

}  // namespace rainbow
