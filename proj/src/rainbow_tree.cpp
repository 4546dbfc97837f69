#include "rainbow/rainbow_tree.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "rainbow/errors.hpp"

namespace rainbow {

namespace {

uint64_t cell_salt(int level, uint64_t index) {
  return (static_cast<uint64_t>(level) << 48) ^ index ^ 0xCE11CE11ull;
}

}  // namespace

RainbowTree::RainbowTree(uint64_t anchor, uint64_t seed, TreeOptions options)
    : opt_(options), seed_(seed), anchor_(anchor) {
  g_ = derive_geometry(anchor, opt_.geometry);
  colors_ = solve_color_distribution(g_, anchor, opt_.geometry.growth);
  color_seed_ = seed_for(seed, Domain::Color);
  node_seed_ = seed_for(seed, Domain::Subproblem);
  rng_ = Rng(derive_master(seed, static_cast<uint64_t>(Domain::Sampler)));
  arr_ = std::make_unique<std::vector<uint64_t>>(g_.capacity(), kEmpty);
  make_cells();
  recount();
}

void RainbowTree::make_cells() {
  const int L = g_.levels();
  cells_.assign(L + 1, {});
  for (int i = 2; i <= L; ++i) {
    const CellParams p = CellParams::make(g_.b(i), opt_.cell_threshold);
    cells_[i].reserve(g_.m(i));
    for (uint64_t j = 0; j < g_.m(i); ++j)
      cells_[i].emplace_back(arr_.get(), g_.buffer_start(i, j), p, derive_master(seed_, cell_salt(i, j)));
  }
}

int RainbowTree::color_of(uint64_t key) const {
  return colors_.draw(uniform_below(color_seed_, key, ColorDistribution::kOne));
}

NodeRef RainbowTree::node_of(uint64_t key) const {
  const int c = color_of(key);
  return {c, uniform_below(node_seed_, key, g_.m(c))};
}

std::vector<NodeRef> RainbowTree::children(NodeRef v) const {
  std::vector<NodeRef> out;
  if (v.level <= 1) return out;
  const uint64_t step = g_.m(v.level);
  for (uint64_t c = v.index; c < g_.m(v.level - 1); c += step) out.push_back({v.level - 1, c});
  return out;
}

uint64_t RainbowTree::node_id(NodeRef v) const { return buffer_begin(v); }

uint64_t RainbowTree::buffer_begin(NodeRef v) const {
  return v.level == 1 ? g_.upper_slots() + v.index : g_.buffer_start(v.level, v.index);
}

NodeRef RainbowTree::owner(uint64_t slot) const {
  NodeRef v;
  g_.locate(slot, v.level, v.index);
  return v;
}

uint64_t RainbowTree::subtree_keys(NodeRef v) const { return v.level == 1 ? 0 : q_[v.level][v.index]; }

bool RainbowTree::window_ok(NodeRef v) const {
  if (v.level == 1 || v.level == g_.levels()) return true;
  const uint64_t t = subtree_slots(v), q = q_[v.level][v.index];
  return q + g_.b(v.level) >= t && q <= t;
}

bool RainbowTree::weakly_feasible(NodeRef v) const {
  if (v.level == 1) return true;
  return win_[v.level][v.index] && bad_kids_[v.level][v.index] == 0;
}

bool RainbowTree::strongly_feasible(NodeRef v) const {
  for (int a = std::max(v.level, 2); a <= g_.levels(); ++a)
    if (!weakly_feasible(ancestor(v, a))) return false;
  return true;
}

void RainbowTree::recount() {
  const int L = g_.levels();
  q_.assign(L + 1, {});
  win_.assign(L + 1, {});
  bad_kids_.assign(L + 1, {});
  for (int i = 2; i <= L; ++i) {
    q_[i].assign(g_.m(i), 0);
    win_[i].assign(g_.m(i), 1);
    bad_kids_[i].assign(g_.m(i), 0);
  }
  size_ = 0;
  uint64_t empties = 0;
  hole_.reset();
  for (uint64_t s = 0; s < arr_->size(); ++s) {
    const uint64_t k = (*arr_)[s];
    if (k == kEmpty) {
      ++empties;
      hole_ = owner(s);
      continue;
    }
    ++size_;
    const NodeRef t = node_of(k);
    for (int a = t.level; a <= L; ++a) ++q_[a][t.index % g_.m(a)];
  }
  if (empties != 1) hole_.reset();
  for (int i = 2; i < L; ++i) {
    for (uint64_t j = 0; j < g_.m(i); ++j) {
      const bool ok = window_ok({i, j});
      win_[i][j] = ok;
      if (!ok) ++bad_kids_[i + 1][j % g_.m(i + 1)];
    }
  }
}

void RainbowTree::set_window(NodeRef v) {
  if (v.level < 2) return;
  const bool ok = window_ok(v);
  if (static_cast<bool>(win_[v.level][v.index]) == ok) return;
  win_[v.level][v.index] = ok;
  if (v.level < g_.levels()) {
    auto& kids = bad_kids_[v.level + 1][v.index % g_.m(v.level + 1)];
    kids = ok ? kids - 1 : kids + 1;
  }
}

void RainbowTree::bump(NodeRef target, int delta) {
  for (int a = target.level; a <= g_.levels(); ++a) {
    const NodeRef v = ancestor(target, a);
    auto& q = q_[a][v.index];
    q = delta > 0 ? q + 1 : q - 1;
    set_window(v);
  }
}

void RainbowTree::refresh_path(NodeRef v) {
  for (int a = std::max(v.level, 2); a <= g_.levels(); ++a) set_window(ancestor(v, a));
}

std::vector<char> RainbowTree::path_strong(NodeRef v) const {
  const int L = g_.levels();
  std::vector<char> s(L + 2, 1);
  for (int a = L; a >= std::max(v.level, 2); --a) s[a] = s[a + 1] && weakly_feasible(ancestor(v, a));
  return s;
}

std::optional<NodeRef> RainbowTree::highest_change(NodeRef v, const std::vector<char>& before) const {
  const auto after = path_strong(v);
  for (int a = g_.levels(); a >= std::max(v.level, 2); --a)
    if (before[a] != after[a]) return ancestor(v, a);
  return std::nullopt;
}

void RainbowTree::remove_from(NodeRef v, uint64_t local, OpReceipt& r) {
  if (v.level == 1) {
    const uint64_t s = buffer_begin(v);
    const uint64_t k = (*arr_)[s];
    require(k != kEmpty, "remove_from: leaf slot is empty");
    (*arr_)[s] = kEmpty;
    r.record(k, s, kNoSlot);
    ++r.wall_steps;
    return;
  }
  cells_[v.level][v.index].remove_at(local, r);
}

void RainbowTree::place_into(NodeRef v, uint64_t key, OpReceipt& r) {
  if (v.level == 1) {
    const uint64_t s = buffer_begin(v);
    if ((*arr_)[s] != kEmpty) throw InvariantError("place_into: leaf slot is occupied");
    (*arr_)[s] = key;
    r.record(key, kNoSlot, s);
    ++r.wall_steps;
    return;
  }
  cells_[v.level][v.index].place(key, r);
}

void RainbowTree::move_between(NodeRef from, uint64_t local, NodeRef to, OpReceipt& r) {
  const uint64_t key = at(from, local);
  remove_from(from, local, r);
  place_into(to, key, r);
}

std::optional<uint64_t> RainbowTree::sample_local(NodeRef v, NodeRef want, OpReceipt& r) {
  const uint64_t b = buffer_size(v);
  auto ok = [&](uint64_t local) {
    const uint64_t k = at(v, local);
    return k != kEmpty && node_of(k) == want;
  };
  for (uint64_t t = 0; t < b; ++t) {
    const uint64_t local = rng_.below(b);
    ++r.probes;
    if (ok(local)) return local;
  }
  for (uint64_t local = 0; local < b; ++local) {
    ++r.probes;
    if (ok(local)) return local;
  }
  return std::nullopt;
}

std::optional<uint64_t> RainbowTree::sample(NodeRef node, int color, OpReceipt& r) {
  const int L = g_.levels();
  require(node.level >= 1 && node.level <= L, "sample: node level out of range");
  require(color >= 2 && color <= L && (color == node.level || color == node.level + 1),
          "sample: colour must be the node's level or the next one");
  const NodeRef want = color == node.level ? node : parent(node);
  auto local = sample_local(node, want, r);
  if (!local) return std::nullopt;
  return at(node, *local);
}

// ---------------------------------------------------------------- queries

bool RainbowTree::scan_range(uint64_t begin, uint64_t len, uint64_t key, uint64_t& probes,
                             std::vector<uint64_t>* log, uint64_t& where) const {
  for (uint64_t s = begin; s < begin + len; ++s) {
    ++probes;
    if (log) log->push_back(s);
    if ((*arr_)[s] == key) {
      where = s;
      return true;
    }
  }
  return false;
}

void RainbowTree::append_subtree(NodeRef v, std::vector<uint64_t>& out, uint64_t limit) const {
  auto push_range = [&](uint64_t begin, uint64_t len) {
    for (uint64_t s = begin; s < begin + len && out.size() < limit; ++s) out.push_back(s);
  };
  push_range(buffer_begin(v), buffer_size(v));
  if (v.level == 1) return;
  const uint64_t step = g_.m(v.level);
  for (int a = v.level - 1; a >= 2 && out.size() < limit; --a)
    for (uint64_t j = v.index; j < g_.m(a) && out.size() < limit; j += step) push_range(g_.buffer_start(a, j), g_.b(a));
  for (uint64_t j = v.index; j < g_.m1() && out.size() < limit; j += step) out.push_back(g_.upper_slots() + j);
}

QueryResult RainbowTree::query(uint64_t key, std::vector<uint64_t>* log) const {
  QueryResult res;
  if (key == kEmpty) return res;
  const NodeRef s = node_of(key);
  bool failure_seen = false;
  auto primary = [&](NodeRef v) {
    if (v.level == 1) return scan_range(buffer_begin(v), 1, key, res.probes, log, res.slot);
    const RainbowCell& c = cells_[v.level][v.index];
    const CellScan sc = c.scan_primary(key, res.probes, log);
    if (sc.found) res.slot = c.offset() + sc.local;
    failure_seen = failure_seen || sc.failure_seen;
    return sc.found;
  };
  const auto kids = children(s);
  if (primary(s)) return res.found = true, res;
  for (NodeRef c : kids)
    if (primary(c)) return res.found = true, res;

  const bool strong = strongly_feasible(s);
  if (failure_seen || !strong) {
    if (scan_range(buffer_begin(s), buffer_size(s), key, res.probes, log, res.slot)) return res.found = true, res;
    for (NodeRef c : kids)
      if (scan_range(buffer_begin(c), buffer_size(c), key, res.probes, log, res.slot)) return res.found = true, res;
  }
  if (strong) return res;

  std::vector<uint64_t> region;
  NodeRef v = s;
  while (true) {
    region.clear();
    append_subtree(v, region, kNoSlot);
    for (uint64_t slot : region) {
      ++res.probes;
      if (log) log->push_back(slot);
      if ((*arr_)[slot] == key) {
        res.slot = slot;
        res.found = true;
        return res;
      }
    }
    if (v.level == g_.levels()) return res;
    v = parent(v);
    if (strongly_feasible(v)) return res;
  }
}

std::vector<uint64_t> RainbowTree::probe_sequence(uint64_t key, uint64_t limit) const {
  std::vector<uint64_t> out;
  const NodeRef s = node_of(key);
  const auto kids = children(s);
  auto primary = [&](NodeRef v) {
    if (v.level == 1) {
      out.push_back(buffer_begin(v));
      return;
    }
    const RainbowCell& c = cells_[v.level][v.index];
    const size_t from = out.size();
    c.primary(key, out);
    for (size_t i = from; i < out.size(); ++i) out[i] += c.offset();
  };
  primary(s);
  for (NodeRef c : kids) {
    if (out.size() >= limit) break;
    primary(c);
  }
  auto push_range = [&](uint64_t begin, uint64_t len) {
    for (uint64_t x = begin; x < begin + len && out.size() < limit; ++x) out.push_back(x);
  };
  push_range(buffer_begin(s), buffer_size(s));
  for (NodeRef c : kids) push_range(buffer_begin(c), buffer_size(c));
  NodeRef v = s;
  while (out.size() < limit) {
    append_subtree(v, out, limit);
    if (v.level == g_.levels()) break;
    v = parent(v);
  }
  if (out.size() > limit) out.resize(limit);
  return out;
}

uint64_t RainbowTree::probe_complexity(uint64_t key) const {
  std::vector<uint64_t> log;
  const QueryResult r = query(key, &log);
  return r.found ? log.size() : 0;
}

// ---------------------------------------------------------------- updates

OpReceipt RainbowTree::build(const std::vector<uint64_t>& keys) {
  require(keys.size() == capacity() || keys.size() + 1 == capacity(),
          "build: key count must equal the capacity or the capacity minus one");
  {
    std::unordered_set<uint64_t> seen(keys.begin(), keys.end());
    require(seen.size() == keys.size(), "build: keys must be distinct");
    require(!seen.count(kEmpty), "build: key 0 is reserved");
  }
  std::fill(arr_->begin(), arr_->end(), kEmpty);
  for (auto& level : cells_)
    for (auto& c : level) c.adopt();
  recount();
  for (uint64_t k : keys) {
    const NodeRef t = node_of(k);
    for (int a = t.level; a <= g_.levels(); ++a) ++q_[a][t.index % g_.m(a)];
  }
  size_ = keys.size();
  for (int i = 2; i < g_.levels(); ++i)
    for (uint64_t j = 0; j < g_.m(i); ++j) set_window({i, j});
  OpReceipt r;
  rebuild_with(root(), keys, r);
  return r;
}

void RainbowTree::adopt(const std::vector<uint64_t>& slots) {
  require(slots.size() >= g_.upper_slots() + g_.m(2), "adopt: array shorter than the tree's upper levels");
  g_ = g_.with_m1(slots.size() - g_.upper_slots());
  *arr_ = slots;
  std::unordered_set<uint64_t> seen;
  uint64_t empties = 0;
  for (uint64_t k : slots) {
    if (k == kEmpty) {
      ++empties;
      continue;
    }
    require(seen.insert(k).second, "adopt: duplicate key in array");
  }
  require(empties <= 1, "adopt: more than one free slot");
  for (auto& level : cells_)
    for (auto& c : level) c.adopt();
  recount();
}

void RainbowTree::reset_capacity(uint64_t capacity) {
  require(capacity >= g_.upper_slots() + g_.m(2), "reset_capacity: capacity below the upper levels");
  g_ = g_.with_m1(capacity - g_.upper_slots());
  arr_->assign(capacity, kEmpty);
  for (auto& level : cells_)
    for (auto& c : level) c.adopt();
  recount();
}

void RainbowTree::swap_in_root(uint64_t a, uint64_t b, OpReceipt& r) {
  const NodeRef top = root();
  require(cells_[top.level][0].params().flat, "swap_in_root: root buffer is not flat");
  cells_[top.level][0].swap_local(a, b, r);
}

std::optional<uint64_t> RainbowTree::root_free_slot() const {
  if (!hole_ || !(*hole_ == root())) return std::nullopt;
  for (uint64_t i = 0; i < buffer_size(root()); ++i)
    if (at(root(), i) == kEmpty) return i;
  return std::nullopt;
}

OpReceipt RainbowTree::insert(uint64_t key) {
  require(key != kEmpty, "insert: key 0 is reserved");
  require(has_free_slot() && size_ + 1 == capacity(), "insert: table needs exactly one free slot");
  if (contains(key)) throw KeyError("insert: key already present");
  OpReceipt r;
  const NodeRef s = node_of(key);
  const auto before = path_strong(s);
  bump(s, +1);
  ++size_;
  insert_walk(key, highest_change(s, before), r);
  return r;
}

void RainbowTree::insert_walk(uint64_t key, std::optional<NodeRef> changed, OpReceipt& r) {
  if (!hole_ || !(*hole_ == root())) throw InvariantError("insert: free slot is not in the root buffer");
  const NodeRef s = node_of(key);
  NodeRef cur = root();
  while (true) {
    if (cur == s || !strongly_feasible(cur)) {
      place_into(cur, key, r);
      break;
    }
    if (changed && cur == *changed) {
      place_into(cur, key, r);
      rebuild(cur, r);
      break;
    }
    const NodeRef c = ancestor(s, cur.level - 1);
    const auto local = sample_local(c, cur, r);
    if (!local) {
      place_into(cur, key, r);
      r.fallback = true;
      rebuild(cur, r);
      break;
    }
    move_between(c, *local, cur, r);
    cur = c;
  }
  hole_.reset();
}

OpReceipt RainbowTree::erase(uint64_t key) {
  require(!has_free_slot(), "erase: table must be full");
  const QueryResult found = query(key);
  if (!found.found) throw KeyError("erase: key not present");
  OpReceipt r;
  r.probes += found.probes;
  const NodeRef w = owner(found.slot);
  const NodeRef s = node_of(key);
  const auto before = path_strong(s);
  remove_from(w, found.slot - buffer_begin(w), r);
  bump(s, -1);
  --size_;
  hole_ = w;
  std::vector<NodeRef> tops;
  if (auto u = highest_change(s, before)) tops.push_back(*u);
  float_hole(w, tops, r);
  return r;
}

void RainbowTree::float_hole(NodeRef at_node, std::vector<NodeRef> tops, OpReceipt& r) {
  hole_ = at_node;
  for (NodeRef u : tops) rebuild(u, r);
  NodeRef v = *hole_;
  if (!strongly_feasible(v)) {
    // Highest infeasible node above the free slot; inside its subtree any
    // arrangement is allowed, so pull one of its own keys down.
    NodeRef top = v;
    for (int a = g_.levels(); a >= std::max(v.level, 2); --a) {
      if (!strongly_feasible(ancestor(v, a))) {
        top = ancestor(v, a);
        break;
      }
    }
    if (!(top == v)) {
      std::optional<uint64_t> pick;
      for (uint64_t local = 0; local < buffer_size(top) && !pick; ++local) {
        ++r.probes;
        const uint64_t k = at(top, local);
        if (k == kEmpty) continue;
        const NodeRef t = node_of(k);
        if (t.level <= top.level && ancestor(t, top.level) == top) pick = local;
      }
      if (pick) {
        move_between(top, *pick, v, r);
        hole_ = top;
      } else {
        r.fallback = true;
        rebuild(top, r);
      }
    }
    v = top;
  }
  while (v.level < g_.levels()) {
    const NodeRef p = parent(v);
    const auto local = sample_local(p, p, r);
    if (local) {
      move_between(p, *local, v, r);
      hole_ = p;
    } else {
      r.fallback = true;
      rebuild(p, r);
    }
    v = p;
  }
  if (!hole_ || !(*hole_ == root())) throw InvariantError("free slot did not reach the root buffer");
}

OpReceipt RainbowTree::grow() {
  require(!has_free_slot(), "grow: table must be full");
  OpReceipt r;
  const NodeRef leaf{1, g_.m1()};
  const auto before = path_strong(leaf);
  g_ = g_.with_m1(g_.m1() + 1);
  arr_->push_back(kEmpty);
  refresh_path(leaf);
  std::vector<NodeRef> tops;
  if (auto u = highest_change(leaf, before)) tops.push_back(*u);
  float_hole(leaf, tops, r);
  return r;
}

namespace {

// Keep only the highest of two possibly nested rebuild roots.
std::vector<NodeRef> merge_tops(const RainbowTree& t, std::optional<NodeRef> a, std::optional<NodeRef> b) {
  std::vector<NodeRef> out;
  if (a && b) {
    const NodeRef hi = a->level >= b->level ? *a : *b;
    const NodeRef lo = a->level >= b->level ? *b : *a;
    out.push_back(hi);
    if (!(t.ancestor(lo, hi.level) == hi)) out.push_back(lo);
  } else if (a) {
    out.push_back(*a);
  } else if (b) {
    out.push_back(*b);
  }
  return out;
}

}  // namespace

OpReceipt RainbowTree::shrink() {
  require(has_free_slot() && hole_ && *hole_ == root(), "shrink: free slot must be in the root buffer");
  require(g_.m1() > g_.m(2), "shrink: every level-2 node needs a leaf");
  OpReceipt r;
  const NodeRef leaf{1, g_.m1() - 1};
  const uint64_t evicted = (*arr_)[buffer_begin(leaf)];
  if (evicted == kEmpty) throw InvariantError("shrink: last leaf slot is empty");
  const NodeRef t = node_of(evicted);
  const auto before_leaf = path_strong(leaf);
  const auto before_key = path_strong(t);
  remove_from(leaf, 0, r);
  bump(t, -1);
  --size_;
  arr_->pop_back();
  g_ = g_.with_m1(g_.m1() - 1);
  refresh_path(leaf);
  auto tops = merge_tops(*this, highest_change(leaf, before_leaf), highest_change(t, before_key));
  for (NodeRef u : tops) rebuild(u, r);
  if (!hole_ || !(*hole_ == root())) throw InvariantError("shrink: free slot left the root buffer");
  const auto before = path_strong(t);
  bump(t, +1);
  ++size_;
  insert_walk(evicted, highest_change(t, before), r);
  return r;
}

OpReceipt RainbowTree::erase_shrink(uint64_t key) {
  require(!has_free_slot(), "erase_shrink: table must be full");
  const uint64_t last = g_.upper_slots() + g_.m1() - 1;
  if ((*arr_)[last] != key || g_.m1() <= g_.m(2)) {
    OpReceipt r = erase(key);
    r.absorb(shrink());
    return r;
  }
  const QueryResult found = query(key);
  if (!found.found) throw KeyError("erase_shrink: key not present");
  OpReceipt r;
  r.probes += found.probes;
  const NodeRef leaf{1, g_.m1() - 1};
  const NodeRef t = node_of(key);
  const auto before_leaf = path_strong(leaf);
  const auto before_key = path_strong(t);
  remove_from(leaf, 0, r);
  bump(t, -1);
  --size_;
  arr_->pop_back();
  g_ = g_.with_m1(g_.m1() - 1);
  refresh_path(leaf);
  hole_.reset();
  for (NodeRef u : merge_tops(*this, highest_change(leaf, before_leaf), highest_change(t, before_key))) rebuild(u, r);
  return r;
}

// ---------------------------------------------------------------- rebuild

void RainbowTree::rebuild(NodeRef node, OpReceipt& r) { rebuild_with(node, {}, r); }

void RainbowTree::rebuild_with(NodeRef u, const std::vector<uint64_t>& loose, OpReceipt& r) {
  require(u.level >= 2 && u.level <= g_.levels(), "rebuild: node must have a buffer of level >= 2");
  const uint64_t t_u = subtree_slots(u);
  r.rebuilds.push_back({u.level, t_u, u.level == g_.levels() ? "table" : "subtree"});

  struct Item {
    uint64_t key;
    uint64_t slot;  // kNoSlot for keys not yet stored
    NodeRef at;     // owner of slot (level 0 when loose)
    NodeRef target;
    uint64_t dest = kNoSlot;  // node id of the assigned buffer
  };
  std::vector<Item> items;
  items.reserve(t_u + loose.size());
  std::vector<uint64_t> region;
  append_subtree(u, region, kNoSlot);
  for (uint64_t s : region) {
    const uint64_t k = (*arr_)[s];
    if (k != kEmpty) items.push_back({k, s, owner(s), node_of(k)});
  }
  for (uint64_t k : loose) items.push_back({k, kNoSlot, NodeRef{0, 0}, node_of(k)});
  if (items.size() > t_u || items.size() + 1 < t_u) throw InvariantError("rebuild: subtree must be full or hold one free slot");
  const uint64_t holes = t_u - items.size();
  r.wall_steps += t_u;

  // Position of the child of v whose subtree contains x; -1 when x is v,
  // above v, or outside v's subtree.
  auto child_pos = [&](NodeRef v, NodeRef x) -> int64_t {
    if (x.level < 1 || x.level >= v.level) return -1;
    const uint64_t c = x.index % g_.m(v.level - 1);
    const uint64_t step = g_.m(v.level);
    if (c % step != v.index) return -1;
    return static_cast<int64_t>((c - v.index) / step);
  };

  auto assign = [&](auto&& self, NodeRef v, std::vector<uint32_t>& set, bool strong_v, uint64_t hole_here) -> void {
    if (v.level == 1) {
      if (set.size() + hole_here != 1) throw InvariantError("rebuild: leaf assignment is not a single key");
      for (uint32_t i : set) items[i].dest = node_id(v);
      return;
    }
    const auto kids = children(v);
    const uint64_t cap_v = g_.b(v.level) - hole_here;
    std::vector<std::vector<uint32_t>> to(kids.size());
    std::vector<uint32_t> keep;  // assigned to v's buffer
    std::vector<uint64_t> need(kids.size());
    const uint64_t vid = node_id(v);

    if (strong_v) {
      std::vector<uint32_t> own;
      for (uint32_t i : set) {
        const Item& it = items[i];
        const int64_t k = child_pos(v, it.target);
        if (k >= 0) to[k].push_back(i);
        else if (it.target == v) own.push_back(i);
        else keep.push_back(i);
      }
      for (size_t k = 0; k < kids.size(); ++k) {
        const uint64_t t_c = subtree_slots(kids[k]);
        if (to[k].size() > t_c || to[k].size() + buffer_size(kids[k]) < t_c)
          throw InvariantError("rebuild: feasible node has a child outside its window");
        need[k] = t_c - to[k].size();
      }
      std::vector<char> used(own.size(), 0);
      // Fillers already in the child's buffer, then deeper in the child.
      for (int pass = 0; pass < 2; ++pass) {
        for (size_t o = 0; o < own.size(); ++o) {
          if (used[o]) continue;
          const Item& it = items[own[o]];
          const int64_t k = child_pos(v, it.at);
          if (k < 0 || need[k] == 0) continue;
          const bool in_buffer = it.at == kids[k];
          if ((pass == 0) != in_buffer) continue;
          to[k].push_back(own[o]);
          --need[k];
          used[o] = 1;
        }
      }
      std::vector<uint32_t> pool, resident;
      for (size_t o = 0; o < own.size(); ++o) {
        if (used[o]) continue;
        (items[own[o]].at == v ? resident : pool).push_back(own[o]);
      }
      std::sort(resident.begin(), resident.end(), [&](uint32_t a, uint32_t b) { return items[a].slot < items[b].slot; });
      pool.insert(pool.end(), resident.begin(), resident.end());
      size_t next = 0;
      for (size_t k = 0; k < kids.size(); ++k) {
        while (need[k] > 0) {
          if (next == pool.size()) throw InvariantError("rebuild: not enough own keys to fill the children");
          to[k].push_back(pool[next++]);
          --need[k];
        }
      }
      keep.insert(keep.end(), pool.begin() + static_cast<long>(next), pool.end());
    } else {
      for (uint32_t i : set) {
        const Item& it = items[i];
        const int64_t k = child_pos(v, it.at);
        if (k < 0) keep.push_back(i);
        else to[k].push_back(i);
      }
      uint64_t deficit = 0;
      for (size_t k = 0; k < kids.size(); ++k) {
        need[k] = subtree_slots(kids[k]) - to[k].size();
        deficit += need[k];
      }
      if (keep.size() != cap_v + deficit) throw InvariantError("rebuild: slot count mismatch");
      std::sort(keep.begin(), keep.end(), [&](uint32_t a, uint32_t b) { return items[a].slot < items[b].slot; });
      std::vector<char> moved(keep.size(), 0);
      auto in_buffer = [&](const Item& it) { return it.at == v; };
      auto foreign = [&](const Item& it) { return !(it.target == v) && child_pos(v, it.target) < 0; };
      // Keys hashing into a short child go there first; then any key of the
      // subtree; keys from outside the subtree last.
      for (int pass = 0; pass < 5 && deficit > 0; ++pass) {
        size_t k_any = 0;
        for (size_t x = 0; x < keep.size() && deficit > 0; ++x) {
          if (moved[x]) continue;
          const Item& it = items[keep[x]];
          int64_t k = -1;
          if (pass <= 1) {
            if (in_buffer(it) != (pass == 1)) continue;
            k = child_pos(v, it.target);
            if (k < 0 || need[k] == 0) continue;
          } else {
            if (pass == 2 && (foreign(it) || in_buffer(it))) continue;
            if (pass == 3 && (foreign(it) || !in_buffer(it))) continue;
            while (k_any < kids.size() && need[k_any] == 0) ++k_any;
            k = static_cast<int64_t>(k_any);
          }
          to[k].push_back(keep[x]);
          --need[k];
          --deficit;
          moved[x] = 1;
        }
      }
      std::vector<uint32_t> rest;
      for (size_t x = 0; x < keep.size(); ++x)
        if (!moved[x]) rest.push_back(keep[x]);
      keep.swap(rest);
    }
    if (keep.size() != cap_v) throw InvariantError("rebuild: buffer assignment has the wrong size");
    for (uint32_t i : keep) items[i].dest = vid;
    for (size_t k = 0; k < kids.size(); ++k) {
      const bool strong_c = strong_v && weakly_feasible(kids[k]);
      self(self, kids[k], to[k], strong_c, 0);
    }
  };

  std::vector<uint32_t> all(items.size());
  for (uint32_t i = 0; i < items.size(); ++i) all[i] = i;
  assign(assign, u, all, strongly_feasible(u), holes);

  // Apply: lift every key that changes buffer, then refill buffer by buffer.
  std::unordered_map<uint64_t, std::vector<uint64_t>> incoming;
  std::vector<NodeRef> touched;
  std::unordered_set<uint64_t> touched_ids;
  auto touch = [&](NodeRef v) {
    if (v.level >= 2 && touched_ids.insert(node_id(v)).second) touched.push_back(v);
  };
  for (const Item& it : items) {
    if (it.dest == kNoSlot) throw InvariantError("rebuild: key left unassigned");
    if (it.slot != kNoSlot && node_id(it.at) == it.dest) continue;
    if (it.slot != kNoSlot) {
      if (it.at.level == 1) {
        (*arr_)[it.slot] = kEmpty;
        r.record(it.key, it.slot, kNoSlot);
        ++r.wall_steps;
      } else {
        cells_[it.at.level][it.at.index].lift(it.slot - buffer_begin(it.at), r);
        touch(it.at);
      }
    }
    incoming[it.dest].push_back(it.key);
  }
  for (auto& [dest, keys] : incoming) {
    const NodeRef v = owner(dest);
    if (v.level == 1) {
      (*arr_)[dest] = keys.front();
      r.record(keys.front(), kNoSlot, dest);
      ++r.wall_steps;
    } else {
      touch(v);
    }
  }
  for (NodeRef v : touched) {
    auto it = incoming.find(node_id(v));
    static const std::vector<uint64_t> none;
    cells_[v.level][v.index].absorb(it == incoming.end() ? none : it->second, r);
  }
  if (holes == 1) hole_ = u;
}

// ---------------------------------------------------------------- checks

TreeReport RainbowTree::check() const {
  TreeReport rep;
  const int L = g_.levels();
  auto fail = [&](std::string msg) {
    if (rep.violations.size() < 64) rep.violations.push_back(std::move(msg));
  };
  std::unordered_set<uint64_t> seen;
  seen.reserve(arr_->size() * 2);
  std::vector<std::vector<uint64_t>> q(L + 1);
  for (int i = 2; i <= L; ++i) q[i].assign(g_.m(i), 0);
  uint64_t keys = 0;
  for (uint64_t s = 0; s < arr_->size(); ++s) {
    const uint64_t k = (*arr_)[s];
    if (k == kEmpty) {
      ++rep.empty_slots;
      if (!(owner(s) == root())) fail("free slot outside the root buffer at " + std::to_string(s));
      continue;
    }
    ++keys;
    if (!seen.insert(k).second) fail("key stored twice: " + std::to_string(k));
    const NodeRef t = node_of(k);
    for (int a = t.level; a <= L; ++a) ++q[a][t.index % g_.m(a)];
  }
  if (arr_->size() != capacity()) fail("array length differs from the capacity");
  if (rep.empty_slots > 1) fail("more than one free slot");
  if (keys != size_) fail("cached size disagrees with the array");
  if (rep.empty_slots == 1 && !(hole_ && *hole_ == root())) fail("free-slot cache is stale");
  if (q != q_) fail("cached subtree counts disagree with the array");

  for (int i = 2; i <= L; ++i) {
    for (uint64_t j = 0; j < g_.m(i); ++j) {
      const NodeRef v{i, j};
      if (static_cast<bool>(win_[i][j]) != window_ok(v)) fail("window cache stale at level " + std::to_string(i));
      uint32_t bad = 0;
      if (i > 2)
        for (NodeRef c : children(v)) bad += !window_ok(c);
      if (bad != bad_kids_[i][j]) fail("child window cache stale at level " + std::to_string(i));
      if (!strongly_feasible(v)) ++rep.infeasible_nodes;
      const CellReport cr = cells_[i][j].check();
      if (cr.encoded_failure) ++rep.failed_cells;
      for (const auto& msg : cr.violations) fail("cell (" + std::to_string(i) + "," + std::to_string(j) + "): " + msg);
    }
  }

  // Placement rules implied by strong feasibility.
  for (uint64_t s = 0; s < arr_->size(); ++s) {
    const uint64_t k = (*arr_)[s];
    if (k == kEmpty) continue;
    const NodeRef w = owner(s);
    const NodeRef t = node_of(k);
    if (strongly_feasible(t) && !(w == t) && !(w.level + 1 == t.level && parent(w) == t))
      fail("key " + std::to_string(k) + " of a feasible node is outside its node and children");
    const auto strong = path_strong(w);
    for (int a = w.level + 1; a <= L; ++a) {
      if (!strong[a]) continue;
      const NodeRef anc = ancestor(w, a);
      const bool below = t.level < a && ancestor(t, a) == anc;
      bool ok;
      if (below) ok = ancestor(t, a - 1) == ancestor(w, a - 1);
      else ok = t == anc && w.level == a - 1;
      if (!ok) {
        fail("key " + std::to_string(k) + " breaks the layout of feasible level-" + std::to_string(a) + " node");
        break;
      }
    }
  }
  return rep;
}

}  // namespace rainbow
