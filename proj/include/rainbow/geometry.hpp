#pragma once
/**
 * Level schedule of the recursion tree and the colour distribution that goes
 * with it, plus the bit-reversed index arithmetic used by the array layout.
 *
 * Levels are numbered 1..L (L = levels()). Level L is the root, level 1 is the
 * layer of single-slot leaves. Level-i subproblem j has parent j mod m_{i+1},
 * so every m_i is a power of two for i >= 2 and only m_1 is free to change.
 *
 * Array layout: the root buffer comes first, then all level L-1 buffers, and so
 * on down to level 2; the m_1 leaves sit at the end so that growing m_1 only
 * appends slots.
 */

#include <cstdint>
#include <string>
#include <vector>

namespace rainbow {

struct GeometryParams {
  double beta = 0.5;          // buffer exponent: b_i ~ buffer_scale * n_i^beta
  double buffer_scale = 8.0;
  double phi = 0.25;          // fanout exponent: f_i ~ n_i^phi
  uint64_t max_fanout = 64;
  uint64_t leaf_threshold = 256;
  uint64_t root_buffer = 16;
  uint64_t min_buffer = 8;
  // Operating range [N, growth * N] that the colour solve is centred on.
  double growth = 1.1;
};

class TreeGeometry {
 public:
  TreeGeometry() = default;

  int levels() const { return static_cast<int>(b_.size()) - 1; }
  // Nominal subproblem size; n(levels()) is the capacity at construction.
  uint64_t n(int i) const { return n_.at(i); }
  uint64_t b(int i) const { return b_.at(i); }
  uint64_t f(int i) const { return f_.at(i); }
  uint64_t m(int i) const { return i == 1 ? m1_ : m_.at(i); }
  uint64_t m1() const { return m1_; }
  // Slots of level i that do not fit the nominal identity and were pushed
  // down to the leaves: n_i = b_i + f_i * n_{i-1} + remainder(i).
  uint64_t remainder(int i) const { return rem_.at(i); }

  uint64_t upper_slots() const { return upper_; }  // sum over i >= 2 of m_i b_i
  uint64_t capacity() const { return upper_ + m1_; }
  uint64_t offset(int i) const { return i == 1 ? upper_ : off_.at(i); }
  uint64_t buffer_start(int i, uint64_t j) const { return offset(i) + j * b(i); }

  // Copy with a different number of leaves.
  TreeGeometry with_m1(uint64_t m1) const;

  // Number of leaves under level-i subproblem k (enumeration-exact).
  uint64_t leaf_count(int i, uint64_t k) const;
  // t_s: slots in the buffers of s and all its descendants.
  uint64_t subtree_size(int i, uint64_t k) const;
  // (level, index) owning an array slot.
  void locate(uint64_t slot, int& level, uint64_t& index) const;
  bool in_subtree(int level, uint64_t index, int anc_level, uint64_t anc_index) const {
    return level <= anc_level && index % m(anc_level) == anc_index;
  }

  uint64_t hash() const;  // fingerprint of the schedule, m_1 excluded
  std::string describe() const;
  const GeometryParams& params() const { return params_; }

 private:
  friend TreeGeometry derive_geometry(uint64_t, const GeometryParams&);
  void finish();

  GeometryParams params_{};
  std::vector<uint64_t> n_, b_, f_, m_, rem_, off_;
  uint64_t m1_ = 0;
  uint64_t upper_ = 0;
};

TreeGeometry derive_geometry(uint64_t capacity, const GeometryParams& params = {});

// p_i for colours 2..L in 32-bit fixed point; sum is exactly 2^32.
struct ColorDistribution {
  static constexpr uint64_t kOne = uint64_t{1} << 32;
  std::vector<uint64_t> p;           // indexed by level; entries 0 and 1 unused
  std::vector<uint64_t> cumulative;  // cumulative[i] = p_2 + ... + p_i
  std::vector<double> offset;        // window offset targeted at construction

  int levels() const { return static_cast<int>(p.size()) - 1; }
  double probability(int i) const { return static_cast<double>(p.at(i)) / kOne; }
  // Colour for a 32-bit uniform draw.
  int draw(uint64_t u32) const;
};

ColorDistribution solve_color_distribution(const TreeGeometry& g, uint64_t n,
                                           double growth = 1.1);

// Window test for every 1 < i < L at the live size g.capacity(). Returns the
// first failing level, or 0 when all windows hold. `where` receives the offset.
int eq1_window_violation(const TreeGeometry& g, const ColorDistribution& c,
                         double* where = nullptr);

// Bit-reversed layout helpers.
uint64_t bit_reversed_parent(uint64_t j, uint64_t m_i, uint64_t m_parent);
std::vector<uint64_t> children_of(uint64_t k, uint64_t m_parent, uint64_t m_child);
std::vector<uint64_t> leaf_slots_of(uint64_t k, uint64_t m_i, uint64_t m1);
uint64_t leaf_slot_count(uint64_t k, uint64_t m_i, uint64_t m1);

uint64_t pow2_floor(uint64_t x);
uint64_t pow2_ceil(uint64_t x);

}  // namespace rainbow
