#include "rainbow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rainbow/errors.hpp"
#include "rainbow/hash_suite.hpp"

namespace rainbow {

uint64_t pow2_floor(uint64_t x) {
  if (x == 0) return 0;
  return uint64_t{1} << (63 - __builtin_clzll(x));
}

uint64_t pow2_ceil(uint64_t x) {
  if (x <= 1) return 1;
  return uint64_t{1} << (64 - __builtin_clzll(x - 1));
}

namespace {

uint64_t pow2_round(double x) {
  if (x <= 1.0) return 1;
  return uint64_t{1} << static_cast<int>(std::lround(std::log2(x)));
}

uint64_t pow2_floor_real(double x) {
  if (x < 2.0) return 1;
  return uint64_t{1} << static_cast<int>(std::floor(std::log2(x)));
}

uint64_t buffer_for(uint64_t n, const GeometryParams& p) {
  const uint64_t cap = std::max<uint64_t>(1, pow2_floor(n / 2));
  uint64_t b = pow2_round(p.buffer_scale * std::pow(static_cast<double>(n), p.beta));
  b = std::max(b, p.min_buffer);
  return std::min(b, cap);
}

}  // namespace

TreeGeometry derive_geometry(uint64_t capacity, const GeometryParams& p) {
  require(p.beta > 0.0 && p.beta < 1.0, "derive_geometry: beta must lie in (0, 1)");
  require(p.phi > 0.0 && p.phi < 1.0 - p.beta, "derive_geometry: phi must lie in (0, 1 - beta)");
  require(p.buffer_scale > 0.0, "derive_geometry: buffer_scale must be positive");
  require(p.leaf_threshold >= 2, "derive_geometry: leaf_threshold must be at least 2");
  require(p.max_fanout >= 2, "derive_geometry: max_fanout must be at least 2");
  if (capacity < 2) throw GeometryError("capacity too small to host two levels");

  struct Top {
    uint64_t n, b, f;
  };
  std::vector<Top> top_down;
  uint64_t cur = capacity;
  bool is_root = true;
  while (true) {
    if (cur <= p.leaf_threshold) {
      top_down.push_back({cur, buffer_for(cur, p), 0});
      break;
    }
    uint64_t b = is_root ? std::min(p.root_buffer, pow2_floor(cur / 2)) : buffer_for(cur, p);
    b = std::max<uint64_t>(b, 1);
    uint64_t f = pow2_floor_real(std::pow(static_cast<double>(cur), p.phi));
    f = std::clamp<uint64_t>(f, 2, pow2_floor(p.max_fanout));
    const uint64_t next = (cur - b) / f;
    if (next < 2 || next < p.leaf_threshold) {
      top_down.push_back({cur, buffer_for(cur, p), 0});
      break;
    }
    top_down.push_back({cur, b, f});
    cur = next;
    is_root = false;
  }

  TreeGeometry g;
  g.params_ = p;
  const int L = static_cast<int>(top_down.size()) + 1;
  g.n_.assign(L + 1, 0);
  g.b_.assign(L + 1, 0);
  g.f_.assign(L + 1, 0);
  g.m_.assign(L + 1, 0);
  g.rem_.assign(L + 1, 0);
  for (int idx = 0; idx < L - 1; ++idx) {
    const int i = L - idx;
    g.n_[i] = top_down[idx].n;
    g.b_[i] = top_down[idx].b;
    g.f_[i] = top_down[idx].f;
  }
  g.n_[1] = 1;
  g.b_[1] = 1;
  g.f_[2] = g.n_[2] - g.b_[2];
  g.m_[L] = 1;
  for (int i = L; i >= 3; --i) g.m_[i - 1] = g.m_[i] * g.f_[i];
  for (int i = 3; i <= L; ++i) g.rem_[i] = g.n_[i] - g.b_[i] - g.f_[i] * g.n_[i - 1];
  g.m_[1] = 0;

  uint64_t upper = 0;
  for (int i = 2; i <= L; ++i) upper += g.m_[i] * g.b_[i];
  if (upper >= capacity) throw GeometryError("capacity too small to host two levels");
  g.m1_ = capacity - upper;
  if (g.m1_ < g.m_[2]) throw GeometryError("geometry leaves a level-2 subproblem without leaves");
  g.finish();
  return g;
}

void TreeGeometry::finish() {
  const int L = levels();
  off_.assign(L + 1, 0);
  off_[L] = 0;
  for (int i = L - 1; i >= 2; --i) off_[i] = off_[i + 1] + m_[i + 1] * b_[i + 1];
  upper_ = off_[2] + m_[2] * b_[2];
  m_[1] = m1_;
}

TreeGeometry TreeGeometry::with_m1(uint64_t m1) const {
  require(m1 >= m_.at(2), "with_m1: every level-2 subproblem needs a leaf");
  TreeGeometry g = *this;
  g.m1_ = m1;
  g.m_[1] = m1;
  return g;
}

uint64_t leaf_slot_count(uint64_t k, uint64_t m_i, uint64_t m1) {
  require(m_i >= 1, "leaf_slot_count: m_i must be positive");
  if (k >= m1) return 0;
  return 1 + (m1 - k - 1) / m_i;
}

uint64_t TreeGeometry::leaf_count(int i, uint64_t k) const {
  if (i == 1) return k < m1_ ? 1 : 0;
  return leaf_slot_count(k, m_.at(i), m1_);
}

uint64_t TreeGeometry::subtree_size(int i, uint64_t k) const {
  uint64_t t = leaf_count(i, k);
  for (int j = 2; j <= i; ++j) t += (m_[j] / m_[i]) * b_[j];
  return t;
}

void TreeGeometry::locate(uint64_t slot, int& level, uint64_t& index) const {
  require(slot < capacity(), "locate: slot out of range");
  if (slot >= upper_) {
    level = 1;
    index = slot - upper_;
    return;
  }
  for (int i = levels(); i >= 2; --i) {
    const uint64_t end = off_[i] + m_[i] * b_[i];
    if (slot < end) {
      level = i;
      index = (slot - off_[i]) / b_[i];
      return;
    }
  }
  throw InvariantError("locate: slot not covered by the layout");
}

uint64_t TreeGeometry::hash() const {
  uint64_t h = splitmix_finalize(static_cast<uint64_t>(levels()));
  for (int i = 2; i <= levels(); ++i) {
    h = splitmix_finalize(h ^ b_[i]);
    h = splitmix_finalize(h ^ (f_[i] << 1));
    h = splitmix_finalize(h ^ (m_[i] << 2));
  }
  return h;
}

std::string TreeGeometry::describe() const {
  std::ostringstream os;
  os << "levels=" << levels() << " capacity=" << capacity() << " m1=" << m1_;
  for (int i = levels(); i >= 2; --i)
    os << " [L" << i << " n=" << n_[i] << " b=" << b_[i] << " f=" << f_[i] << " m=" << m_[i] << "]";
  return os.str();
}

int ColorDistribution::draw(uint64_t u32) const {
  const int L = levels();
  for (int i = 2; i < L; ++i)
    if (u32 < cumulative[i]) return i;
  return L;
}

ColorDistribution solve_color_distribution(const TreeGeometry& g, uint64_t n, double growth) {
  require(n == g.capacity(), "solve_color_distribution: n must equal the geometry's slot count");
  require(growth >= 1.0, "solve_color_distribution: growth must be at least 1");
  const int L = g.levels();
  ColorDistribution c;
  c.p.assign(L + 1, 0);
  c.cumulative.assign(L + 1, 0);
  c.offset.assign(L + 1, 0.0);
  const double N = static_cast<double>(n);
  double T = static_cast<double>(g.m1());
  uint64_t prev = 0;
  for (int i = 2; i < L; ++i) {
    const double level_mass = static_cast<double>(g.m(i) * g.b(i));
    T += level_mass;
    const double above = N - T;
    const double rho = above / level_mass;
    const double o = (1.0 - (growth - 1.0) * rho) / (1.0 + growth);
    c.offset[i] = o;
    const double ci = (T - o * level_mass) / N;
    const auto fixed = static_cast<uint64_t>(std::llround(ci * static_cast<double>(ColorDistribution::kOne)));
    if (fixed <= prev || fixed >= ColorDistribution::kOne)
      throw GeometryError("colour solve produced a non-positive p at level " + std::to_string(i));
    c.cumulative[i] = fixed;
    c.p[i] = fixed - prev;
    prev = fixed;
  }
  c.cumulative[L] = ColorDistribution::kOne;
  c.p[L] = ColorDistribution::kOne - prev;
  if (c.p[L] == 0) throw GeometryError("colour solve left the root colour empty");

  if (int bad = eq1_window_violation(g, c); bad != 0)
    throw GeometryError("offset window violated at level " + std::to_string(bad) + " at n = N");
  if (growth > 1.0) {
    const auto extra = static_cast<uint64_t>(std::floor((growth - 1.0) * N));
    if (int bad = eq1_window_violation(g.with_m1(g.m1() + extra), c); bad != 0)
      throw GeometryError("window violated at level " + std::to_string(bad) + " at the top of the range");
  }
  return c;
}

int eq1_window_violation(const TreeGeometry& g, const ColorDistribution& c, double* where) {
  const int L = g.levels();
  require(c.levels() == L, "eq1_window_violation: distribution does not match geometry");
  const double n = static_cast<double>(g.capacity());
  double T = static_cast<double>(g.m1());
  for (int i = 2; i < L; ++i) {
    const double mass = static_cast<double>(g.m(i) * g.b(i));
    T += mass;
    const double lhs = static_cast<double>(c.cumulative[i]) / static_cast<double>(ColorDistribution::kOne) * n;
    const double off = (T - lhs) / mass;
    if (where) *where = off;
    const double eps = 1e-9;
    if (off < 0.4 - eps || off > 0.6 + eps) return i;
  }
  return 0;
}

uint64_t bit_reversed_parent(uint64_t j, uint64_t m_i, uint64_t m_parent) {
  require(j < m_i, "bit_reversed_parent: index out of range");
  require(m_parent >= 1 && (m_parent & (m_parent - 1)) == 0, "bit_reversed_parent: parent count must be a power of two");
  return j & (m_parent - 1);
}

std::vector<uint64_t> children_of(uint64_t k, uint64_t m_parent, uint64_t m_child) {
  require(k < m_parent, "children_of: index out of range");
  std::vector<uint64_t> out;
  for (uint64_t j = k; j < m_child; j += m_parent) out.push_back(j);
  return out;
}

std::vector<uint64_t> leaf_slots_of(uint64_t k, uint64_t m_i, uint64_t m1) {
  require(k < m_i, "leaf_slots_of: index out of range");
  std::vector<uint64_t> out;
  for (uint64_t j = k; j < m1; j += m_i) out.push_back(j);
  return out;
}

}  // namespace rainbow
