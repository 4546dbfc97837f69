#include "rainbow/epsilon_table.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "rainbow/errors.hpp"

namespace rainbow {

namespace {

constexpr uint64_t kMinSubtableScale = 64;

// True when `h` lies cyclically in (lo, hi].
bool cyclic_between(uint64_t lo, uint64_t h, uint64_t hi) {
  return lo <= hi ? (lo < h && h <= hi) : (lo < h || h <= hi);
}

}  // namespace

std::string to_string(EpsilonMode m) {
  switch (m) {
    case EpsilonMode::Plain:
      return "plain";
    case EpsilonMode::Normal:
      return "normal";
    case EpsilonMode::Failure:
      return "failure";
  }
  return "?";
}

uint64_t subtable_scale(double epsilon, uint64_t anchor, uint64_t k_override) {
  if (k_override) {
    const uint64_t k = std::min(k_override, pow2_floor(anchor / 2));
    return k < 4 ? 0 : k;
  }
  if (epsilon < 8.0 / std::sqrt(static_cast<double>(anchor))) return 0;
  const uint64_t k =
      std::min(pow2_ceil(static_cast<uint64_t>(std::ceil(32.0 / (epsilon * epsilon)))), pow2_floor(anchor / 2));
  return k < kMinSubtableScale ? 0 : k;
}

EpsilonTable::EpsilonTable(EpsilonOptions options, uint64_t seed)
    : opt_(options),
      seed_(seed),
      g_seed_(seed_for(seed, Domain::Subtable)),
      a_seed_(seed_for(seed, Domain::Overflow)),
      rng_(derive_master(seed, static_cast<uint64_t>(Domain::Sampler))) {
  require(opt_.epsilon > 0.0 && opt_.epsilon < 0.5, "EpsilonTable: epsilon must lie in (0, 1/2)");
  require(opt_.spill_scale > 0.0, "EpsilonTable: spill_scale must be positive");
  if (opt_.base) sched_.emplace(opt_.base, seed);
}

uint64_t EpsilonTable::region_z(uint64_t n) const {
  return n - static_cast<uint64_t>(std::ceil(opt_.epsilon * static_cast<double>(n)));
}

uint64_t EpsilonTable::home_a(uint64_t key) const { return uniform_below(a_seed_, key, a_); }

uint64_t EpsilonTable::subtable_of(uint64_t key) const {
  require(S_ > 0, "subtable_of: table has no subtables");
  return uniform_below(g_seed_, key, S_);
}

uint64_t EpsilonTable::subtable_capacity(uint64_t i) const { return z_of(i, Z_); }

uint64_t EpsilonTable::slot_count() const {
  if (mode_ == EpsilonMode::Plain) return plain_ ? plain_->capacity() : 0;
  return hbase() + Z_;
}

void EpsilonTable::configure(uint64_t anchor) {
  anchor_ = anchor;
  k_ = subtable_scale(opt_.epsilon, anchor, opt_.k_override);
  if (k_ == 0) {
    mode_ = EpsilonMode::Plain;
    S_ = a_ = nb_ = 0;
    subs_.clear();
    A_.clear();
    B_.clear();
    fail_.clear();
    return;
  }
  mode_ = EpsilonMode::Normal;
  plain_.reset();
  subs_.clear();
  S_ = anchor / k_;
  const double eN = opt_.epsilon * static_cast<double>(anchor);
  a_ = std::max<uint64_t>(2, static_cast<uint64_t>(std::ceil(2.0 * eN / static_cast<double>(S_))));
  nb_ = std::max<uint64_t>(1, static_cast<uint64_t>(std::ceil(opt_.spill_scale * eN)));
}

EpsilonTable::Sub EpsilonTable::make_sub(uint64_t i) const {
  const double share = 0.5 * (1.0 - opt_.epsilon) * static_cast<double>(anchor_) / static_cast<double>(S_);
  const uint64_t base = std::max<uint64_t>(4, static_cast<uint64_t>(share));
  const uint64_t seed = derive_master(derive_master(seed_, static_cast<uint64_t>(Domain::Subtable)), i);
  return Sub{ResizableTree(base, seed, opt_.tree), {}, false, 0, 0};
}

uint64_t EpsilonTable::local_at(uint64_t i, uint64_t p) const {
  const Sub& s = subs_[i];
  return s.under ? s.raw[p] : s.tree.slots()[p];
}

uint64_t EpsilonTable::at(uint64_t g) const {
  if (mode_ == EpsilonMode::Plain) return plain_->slots()[g];
  if (mode_ == EpsilonMode::Failure) return fail_[g];
  if (g == 0) return kEmpty;
  if (g < 1 + nb_) return B_[g - 1];
  if (g < hbase()) return A_[g - 1 - nb_];
  const uint64_t off = g - hbase();
  return local_at(off % S_, off / S_);
}

std::vector<uint64_t> EpsilonTable::slots() const {
  if (mode_ == EpsilonMode::Plain) return plain_ ? plain_->slots() : std::vector<uint64_t>{};
  if (mode_ == EpsilonMode::Failure) return fail_;
  std::vector<uint64_t> out(slot_count(), kEmpty);
  std::copy(B_.begin(), B_.end(), out.begin() + 1);
  std::copy(A_.begin(), A_.end(), out.begin() + 1 + static_cast<std::ptrdiff_t>(nb_));
  for (uint64_t i = 0; i < S_; ++i) {
    const uint64_t z = z_of(i, Z_);
    for (uint64_t p = 0; p < z; ++p) out[hpos(i, p)] = local_at(i, p);
  }
  return out;
}

std::vector<uint64_t> EpsilonTable::all_keys() const {
  std::vector<uint64_t> out;
  out.reserve(n_);
  for (uint64_t k : slots())
    if (k != kEmpty) out.push_back(k);
  return out;
}

void EpsilonTable::absorb_local(uint64_t i, const OpReceipt& local, OpReceipt& r) const {
  auto map = [&](uint64_t s) { return s == kNoSlot ? kNoSlot : hpos(i, s); };
  for (const Move& m : local.trail) r.record(m.key, map(m.from), map(m.to));
  for (const RebuildEvent& e : local.rebuilds) r.rebuilds.push_back({e.level, e.size, "subtable " + e.scope});
  r.probes += local.probes;
  r.wall_steps += local.wall_steps;
  r.fallback = r.fallback || local.fallback;
}

// ---------------------------------------------------------------- building

void EpsilonTable::shell_subs() {
  for (uint64_t i = 0; i < S_; ++i) {
    Sub& s = subs_[i];
    s.tree.shell(z_of(i, Z_));
    s.raw.clear();
    s.under = false;
    s.in_a = s.in_b = 0;
  }
  std::fill(A_.begin(), A_.end(), kEmpty);
  std::fill(B_.begin(), B_.end(), kEmpty);
}

bool EpsilonTable::lay_out(const std::vector<uint64_t>& keys) {
  if (subs_.size() != S_) {
    subs_.clear();
    subs_.reserve(S_);
    for (uint64_t i = 0; i < S_; ++i) subs_.push_back(make_sub(i));
  }
  A_.assign(S_ * a_, kEmpty);
  B_.assign(nb_, kEmpty);
  std::vector<std::vector<uint64_t>> groups(S_);
  for (uint64_t k : keys) groups[subtable_of(k)].push_back(k);
  std::vector<std::pair<uint64_t, uint64_t>> spill;
  for (uint64_t i = 0; i < S_; ++i) {
    auto& grp = groups[i];
    std::sort(grp.begin(), grp.end());
    Sub& s = subs_[i];
    s.in_a = s.in_b = 0;
    const uint64_t z = z_of(i, Z_);
    if (grp.size() >= z) {
      s.tree.build(std::vector<uint64_t>(grp.begin(), grp.begin() + static_cast<std::ptrdiff_t>(z)));
      s.under = false;
      s.raw.clear();
      for (size_t j = z; j < grp.size(); ++j) spill.push_back({i, grp[j]});
    } else {
      s.tree.shell(z);
      s.under = true;
      s.raw.assign(z, kEmpty);
      std::copy(grp.begin(), grp.end(), s.raw.begin() + 1);
    }
  }
  OpReceipt scratch;
  for (auto [i, k] : spill)
    if (!o_insert(i, k, scratch)) return false;
  fail_.clear();
  mode_ = EpsilonMode::Normal;
  return true;
}

void EpsilonTable::lay_out_failure(const std::vector<uint64_t>& keys) {
  mode_ = EpsilonMode::Failure;
  shell_subs();
  fail_.assign(hbase() + Z_, kEmpty);
  require(keys.size() < fail_.size(), "lay_out_failure: array too small for the keys");
  std::copy(keys.begin(), keys.end(), fail_.begin());
}

OpReceipt EpsilonTable::rebuild_all(const std::vector<uint64_t>& keys) {
  const std::vector<uint64_t> before = slots();
  uint64_t anchor = opt_.fixed_anchor;
  if (!anchor) {
    if (!sched_) sched_.emplace(std::max<uint64_t>(4, keys.size() / 2), seed_);
    anchor = sched_->threshold(sched_->index_for(keys.size()));
  }
  if (anchor_ && anchor != anchor_) ++anchor_rebuilds_;
  configure(anchor);
  n_ = keys.size();
  OpReceipt inner;
  if (mode_ == EpsilonMode::Plain) {
    const uint64_t base = sched_ ? sched_->base() : std::max<uint64_t>(4, anchor * 85 / 100);
    plain_ = std::make_unique<ResizableTree>(base, seed_, opt_.tree);
    inner = plain_->build(keys);
  } else {
    Z_ = region_z(n_);
    if (!lay_out(keys)) {
      ++failures_;
      lay_out_failure(keys);
    }
  }
  OpReceipt r = diff_receipt(before, slots());
  r.probes = inner.probes;
  r.wall_steps = inner.wall_steps + before.size() + slot_count();
  r.rebuilds.push_back({0, slot_count(), "global"});
  return r;
}

OpReceipt EpsilonTable::build(const std::vector<uint64_t>& keys) {
  std::unordered_set<uint64_t> seen(keys.begin(), keys.end());
  require(seen.size() == keys.size(), "build: keys must be distinct");
  require(!seen.count(kEmpty), "build: key 0 is reserved");
  mode_ = EpsilonMode::Plain;
  plain_.reset();
  subs_.clear();
  anchor_ = 0;
  return rebuild_all(keys);
}

// ---------------------------------------------------------- overflow buffers

bool EpsilonTable::o_insert(uint64_t i, uint64_t key, OpReceipt& r) {
  Sub& s = subs_[i];
  if (s.in_a < a_) {
    const uint64_t h = home_a(key);
    for (uint64_t t = 0; t < a_; ++t) {
      const uint64_t j = (h + t) % a_;
      ++r.probes;
      ++r.wall_steps;
      if (A_[i * a_ + j] == kEmpty) {
        A_[i * a_ + j] = key;
        r.record(key, kNoSlot, apos(i, j));
        ++s.in_a;
        return true;
      }
    }
    throw InvariantError("o_insert: overflow array count disagrees with its contents");
  }
  const uint64_t h = home_b(i);
  for (uint64_t t = 0; t < nb_; ++t) {
    const uint64_t j = (h + t) % nb_;
    ++r.probes;
    ++r.wall_steps;
    if (B_[j] == kEmpty) {
      B_[j] = key;
      r.record(key, kNoSlot, bpos(j));
      ++s.in_b;
      return true;
    }
  }
  return false;
}

void EpsilonTable::shift_remove(bool spill, uint64_t begin, uint64_t size, uint64_t hole, OpReceipt& r) {
  std::vector<uint64_t>& v = spill ? B_ : A_;
  auto global = [&](uint64_t j) { return spill ? bpos(j) : 1 + nb_ + begin + j; };
  auto home = [&](uint64_t k) { return spill ? home_b(subtable_of(k)) : home_a(k); };
  uint64_t i = hole, j = hole;
  for (uint64_t step = 1; step < size; ++step) {
    j = (j + 1) % size;
    const uint64_t k = v[begin + j];
    ++r.wall_steps;
    if (k == kEmpty) return;
    if (cyclic_between(i, home(k), j)) continue;
    v[begin + i] = k;
    v[begin + j] = kEmpty;
    r.record(k, global(j), global(i));
    i = j;
  }
}

void EpsilonTable::o_remove_at(uint64_t g, OpReceipt& r) {
  if (g < 1 + nb_) {
    const uint64_t j = g - 1;
    const uint64_t k = B_[j];
    --subs_[subtable_of(k)].in_b;
    B_[j] = kEmpty;
    r.record(k, g, kNoSlot);
    shift_remove(true, 0, nb_, j, r);
    return;
  }
  const uint64_t off = g - 1 - nb_;
  const uint64_t i = off / a_, j = off % a_;
  const uint64_t k = A_[off];
  Sub& s = subs_[i];
  --s.in_a;
  A_[off] = kEmpty;
  r.record(k, g, kNoSlot);
  shift_remove(false, i * a_, a_, j, r);
  if (s.in_b == 0) return;
  // A_i has room again: bring one of its keys back from B.
  const uint64_t h = home_b(i);
  for (uint64_t t = 0; t < nb_; ++t) {
    const uint64_t bj = (h + t) % nb_;
    ++r.probes;
    const uint64_t y = B_[bj];
    if (y == kEmpty) break;
    if (subtable_of(y) != i) continue;
    B_[bj] = kEmpty;
    --s.in_b;
    r.record(y, bpos(bj), kNoSlot);
    shift_remove(true, 0, nb_, bj, r);
    o_insert(i, y, r);
    return;
  }
  throw InvariantError("o_remove_at: spilled key of the subtable not found in its run");
}

std::optional<uint64_t> EpsilonTable::o_sample(uint64_t i, OpReceipt& r) {
  if (subs_[i].in_a == 0) return std::nullopt;
  for (uint64_t t = 0; t < 4 * a_; ++t) {
    const uint64_t j = rng_.below(a_);
    ++r.probes;
    if (A_[i * a_ + j] != kEmpty) return apos(i, j);
  }
  for (uint64_t j = 0; j < a_; ++j) {
    ++r.probes;
    if (A_[i * a_ + j] != kEmpty) return apos(i, j);
  }
  throw InvariantError("o_sample: overflow array count disagrees with its contents");
}

// ---------------------------------------------------------------- subtables

void EpsilonTable::to_under(uint64_t i, std::vector<uint64_t> raw, OpReceipt& r) {
  Sub& s = subs_[i];
  // Exactly one hole somewhere; park it in local slot 0.
  if (raw[0] != kEmpty) {
    const auto hole = std::find(raw.begin() + 1, raw.end(), kEmpty);
    if (hole == raw.end()) throw InvariantError("to_under: no free slot in the subtable");
    const uint64_t p = static_cast<uint64_t>(hole - raw.begin());
    *hole = raw[0];
    raw[0] = kEmpty;
    r.record(*hole, hpos(i, 0), hpos(i, p));
    ++r.wall_steps;
  }
  s.raw = std::move(raw);
  s.under = true;
  s.tree.shell(s.raw.size());
}

void EpsilonTable::from_under(uint64_t i, OpReceipt& r) {
  Sub& s = subs_[i];
  std::vector<uint64_t> keys;
  for (uint64_t k : s.raw)
    if (k != kEmpty) keys.push_back(k);
  require(keys.size() == s.raw.size(), "from_under: subtable is not full");
  s.tree.build(keys);
  OpReceipt local = diff_receipt(s.raw, s.tree.slots());
  local.wall_steps += s.raw.size();
  local.rebuilds.push_back({0, s.raw.size(), "fill"});
  s.raw.clear();
  s.under = false;
  absorb_local(i, local, r);
}

void EpsilonTable::under_insert(uint64_t i, uint64_t key, OpReceipt& r) {
  Sub& s = subs_[i];
  const auto hole = std::find(s.raw.begin() + 1, s.raw.end(), kEmpty);
  if (hole == s.raw.end()) {
    s.raw[0] = key;
    r.record(key, kNoSlot, hpos(i, 0));
    from_under(i, r);
    return;
  }
  *hole = key;
  const uint64_t p = static_cast<uint64_t>(hole - s.raw.begin());
  r.record(key, kNoSlot, hpos(i, p));
  r.wall_steps += p;
}

void EpsilonTable::grow_sub(uint64_t i, OpReceipt& r) {
  Sub& s = subs_[i];
  if (s.under) {
    s.raw.push_back(kEmpty);
    s.tree.shell(s.raw.size());
    return;
  }
  if (auto g = o_sample(i, r)) {
    const uint64_t y = at(*g);
    o_remove_at(*g, r);
    absorb_local(i, s.tree.grow_insert(y), r);
    return;
  }
  std::vector<uint64_t> raw = s.tree.slots();
  raw.push_back(kEmpty);
  to_under(i, std::move(raw), r);
}

bool EpsilonTable::shrink_sub(uint64_t i, OpReceipt& r) {
  Sub& s = subs_[i];
  if (s.under) {
    const uint64_t last = s.raw.size() - 1;
    const uint64_t w = s.raw[last];
    s.raw.pop_back();
    if (w == kEmpty) {
      s.tree.shell(s.raw.size());
      return true;
    }
    const auto hole = std::find(s.raw.begin() + 1, s.raw.end(), kEmpty);
    if (hole == s.raw.end()) {
      // Every slot but 0 is taken: the subtable is full again.
      s.raw[0] = w;
      r.record(w, hpos(i, last), hpos(i, 0));
      from_under(i, r);
      return true;
    }
    *hole = w;
    r.record(w, hpos(i, last), hpos(i, static_cast<uint64_t>(hole - s.raw.begin())));
    ++r.wall_steps;
    s.tree.shell(s.raw.size());
    return true;
  }
  const std::vector<uint64_t>& local = s.tree.slots();
  const uint64_t y = local[rng_.below(local.size())];
  ++r.probes;
  absorb_local(i, s.tree.shrink_delete(y), r);
  return o_insert(i, y, r);
}

bool EpsilonTable::adjust_capacity(OpReceipt& r) {
  const uint64_t want = region_z(n_);
  while (Z_ < want) {
    const uint64_t j = Z_ % S_;
    ++Z_;
    grow_sub(j, r);
  }
  while (Z_ > want) {
    --Z_;
    if (!shrink_sub(Z_ % S_, r)) return false;
  }
  return true;
}

// ----------------------------------------------------------------- failure

void EpsilonTable::failure_resize(OpReceipt& r) {
  Z_ = region_z(n_);
  const uint64_t len = hbase() + Z_;
  while (fail_.size() > len) {
    const uint64_t last = fail_.size() - 1;
    const uint64_t k = fail_[last];
    fail_.pop_back();
    if (k == kEmpty) continue;
    const auto hole = std::find(fail_.begin() + 1, fail_.end(), kEmpty);
    if (hole == fail_.end()) throw InvariantError("failure_resize: no room for a displaced key");
    *hole = k;
    r.record(k, last, static_cast<uint64_t>(hole - fail_.begin()));
  }
  fail_.resize(len, kEmpty);
  for (uint64_t i = 0; i < S_; ++i) subs_[i].tree.shell(z_of(i, Z_));
}

void EpsilonTable::try_recover(OpReceipt& r) {
  const std::vector<uint64_t> before = fail_;
  std::vector<uint64_t> keys;
  keys.reserve(n_);
  for (uint64_t k : fail_)
    if (k != kEmpty) keys.push_back(k);
  r.wall_steps += before.size();
  if (lay_out(keys)) {
    r.absorb(diff_receipt(before, slots()));
    r.rebuilds.push_back({0, slot_count(), "recover"});
    return;
  }
  mode_ = EpsilonMode::Failure;
  fail_ = before;
  shell_subs();
}

// ----------------------------------------------------------------- updates

OpReceipt EpsilonTable::insert(uint64_t key) {
  require(key != kEmpty, "insert: key 0 is reserved");
  const QueryResult q = query(key);
  if (q.found) throw KeyError("insert: key already present");
  if (!opt_.fixed_anchor && sched_ && sched_->threshold(sched_->index_for(n_ + 1)) != anchor_) {
    std::vector<uint64_t> keys = all_keys();
    keys.push_back(key);
    OpReceipt r = rebuild_all(keys);
    r.probes += q.probes;
    return r;
  }
  OpReceipt r;
  r.probes = q.probes;
  if (mode_ == EpsilonMode::Plain) {
    r.absorb(plain_->grow_insert(key));
    ++n_;
    return r;
  }
  if (mode_ == EpsilonMode::Failure) {
    ++n_;
    failure_resize(r);
    const auto hole = std::find(fail_.begin() + 1, fail_.end(), kEmpty);
    if (hole == fail_.end()) throw InvariantError("insert: failure array has no free slot");
    *hole = key;
    r.record(key, kNoSlot, static_cast<uint64_t>(hole - fail_.begin()));
    try_recover(r);
    return r;
  }
  const uint64_t i = subtable_of(key);
  bool ok = true;
  if (subs_[i].under) under_insert(i, key, r);
  else ok = o_insert(i, key, r);
  if (!ok) {
    std::vector<uint64_t> keys = all_keys();
    keys.push_back(key);
    OpReceipt rb = rebuild_all(keys);
    rb.probes += r.probes;
    return rb;
  }
  ++n_;
  if (!adjust_capacity(r)) {
    // A key displaced by the shrink found no room: relay everything out.
    std::vector<uint64_t> keys;
    keys.reserve(n_);
    const std::vector<uint64_t> cur = slots();
    for (uint64_t k : cur)
      if (k != kEmpty) keys.push_back(k);
    for (const Move& m : r.trail)
      if (m.to == kNoSlot && std::find(keys.begin(), keys.end(), m.key) == keys.end()) keys.push_back(m.key);
    r.absorb(rebuild_all(keys));
  }
  return r;
}

OpReceipt EpsilonTable::erase(uint64_t key) {
  const QueryResult q = query(key);
  if (!q.found) throw KeyError("erase: key not present");
  if (!opt_.fixed_anchor && sched_ && n_ - 1 >= sched_->threshold(0) &&
      sched_->threshold(sched_->index_for(n_ - 1)) != anchor_) {
    std::vector<uint64_t> keys = all_keys();
    keys.erase(std::find(keys.begin(), keys.end(), key));
    OpReceipt r = rebuild_all(keys);
    r.probes += q.probes;
    return r;
  }
  if (!opt_.fixed_anchor && sched_ && n_ - 1 < sched_->threshold(0))
    throw CapacityError("erase: table cannot hold fewer than " + std::to_string(sched_->threshold(0)) + " keys");
  OpReceipt r;
  r.probes = q.probes;
  if (mode_ == EpsilonMode::Plain) {
    r.absorb(plain_->shrink_delete(key));
    --n_;
    return r;
  }
  if (mode_ == EpsilonMode::Failure) {
    fail_[q.slot] = kEmpty;
    r.record(key, q.slot, kNoSlot);
    if (q.slot == 0) {
      // Keep the mode slot occupied.
      for (uint64_t s = fail_.size(); s-- > 1;)
        if (fail_[s] != kEmpty) {
          fail_[0] = fail_[s];
          fail_[s] = kEmpty;
          r.record(fail_[0], s, 0);
          break;
        }
    }
    --n_;
    failure_resize(r);
    try_recover(r);
    return r;
  }
  const uint64_t i = subtable_of(key);
  Sub& s = subs_[i];
  if (q.slot < hbase()) {
    o_remove_at(q.slot, r);
  } else {
    const uint64_t p = (q.slot - hbase()) / S_;
    if (s.under) {
      s.raw[p] = kEmpty;
      r.record(key, q.slot, kNoSlot);
    } else if (auto g = o_sample(i, r)) {
      const uint64_t y = at(*g);
      o_remove_at(*g, r);
      RainbowTree& t = s.tree.tree();
      OpReceipt local = t.erase(key);
      local.absorb(t.insert(y));
      absorb_local(i, local, r);
    } else {
      std::vector<uint64_t> raw = s.tree.slots();
      raw[p] = kEmpty;
      r.record(key, q.slot, kNoSlot);
      to_under(i, std::move(raw), r);
    }
  }
  --n_;
  if (!adjust_capacity(r)) {
    std::vector<uint64_t> keys;
    for (uint64_t k : slots())
      if (k != kEmpty) keys.push_back(k);
    for (const Move& m : r.trail)
      if (m.to == kNoSlot && m.key != key && std::find(keys.begin(), keys.end(), m.key) == keys.end())
        keys.push_back(m.key);
    r.absorb(rebuild_all(keys));
  }
  return r;
}

// ----------------------------------------------------------------- queries

std::vector<uint64_t> EpsilonTable::o_static(uint64_t key, uint64_t limit) const {
  std::vector<uint64_t> out;
  const uint64_t i = subtable_of(key);
  const uint64_t h = home_a(key);
  for (uint64_t t = 0; t < a_ && out.size() < limit; ++t) out.push_back(apos(i, (h + t) % a_));
  const uint64_t hb = home_b(i);
  for (uint64_t t = 0; t < nb_ && out.size() < limit; ++t) out.push_back(bpos((hb + t) % nb_));
  return out;
}

std::vector<uint64_t> EpsilonTable::h_static(uint64_t key, uint64_t limit) const {
  std::vector<uint64_t> out;
  if (limit == 0) return out;
  const uint64_t i = subtable_of(key);
  out.push_back(hpos(i, 0));
  for (uint64_t s : subs_[i].tree.probe_sequence(key, limit - 1)) out.push_back(hpos(i, s));
  return out;
}

std::vector<uint64_t> EpsilonTable::probe_sequence(uint64_t key, uint64_t limit) const {
  if (mode_ == EpsilonMode::Plain) return plain_->probe_sequence(key, limit);
  std::vector<uint64_t> out;
  if (limit == 0) return out;
  out.push_back(0);
  const auto O = o_static(key, kNoSlot);
  const auto H = h_static(key, kNoSlot);
  for (size_t t = 0; t < std::max(O.size(), H.size()) && out.size() < limit; ++t) {
    if (t < O.size()) out.push_back(O[t]);
    if (t < H.size() && out.size() < limit) out.push_back(H[t]);
  }
  const uint64_t len = slot_count();
  for (uint64_t s = 0; s < len && out.size() < limit; ++s) out.push_back(s);
  return out;
}

QueryResult EpsilonTable::query(uint64_t key, std::vector<uint64_t>* log) const {
  QueryResult res;
  if (key == kEmpty) return res;
  if (mode_ == EpsilonMode::Plain) return plain_ ? plain_->query(key, log) : res;
  const bool failed = mode_ == EpsilonMode::Failure;
  auto probe = [&](uint64_t s) {
    ++res.probes;
    if (log) log->push_back(s);
    if (at(s) == key) {
      res.found = true;
      res.slot = s;
    }
    return res.found;
  };
  if (probe(0)) return res;

  // Length of each half: up to the key, up to the first empty (normal
  // mode), or the whole half.
  const uint64_t i = subtable_of(key);
  const std::vector<uint64_t> O = o_static(key, kNoSlot);
  uint64_t oc = O.size();
  for (uint64_t t = 0; t < O.size(); ++t) {
    const uint64_t v = at(O[t]);
    if (v == key || (!failed && v == kEmpty)) {
      oc = t + 1;
      break;
    }
  }
  uint64_t hc = 0;
  const Sub& sub = subs_[i];
  const uint64_t h0 = at(hpos(i, 0));
  if (!failed && h0 != kEmpty && !sub.under) {
    hc = h0 == key ? 1 : 1 + sub.tree.query(key).probes;
  } else {
    const std::vector<uint64_t> H = h_static(key, kNoSlot);
    hc = H.size();
    for (uint64_t t = 0; t < H.size(); ++t)
      if (at(H[t]) == key) {
        hc = t + 1;
        break;
      }
  }
  const uint64_t span = std::max(oc, hc);
  const std::vector<uint64_t> H = h_static(key, span);
  for (uint64_t t = 0; t < span; ++t) {
    if (t < O.size() && probe(O[t])) return res;
    if (t < H.size() && probe(H[t])) return res;
  }
  if (!failed) return res;
  const uint64_t len = slot_count();
  for (uint64_t s = 0; s < len; ++s)
    if (probe(s)) return res;
  return res;
}

uint64_t EpsilonTable::probe_complexity(uint64_t key) const {
  const QueryResult q = query(key);
  return q.found ? q.probes : 0;
}

// ------------------------------------------------------------------ checks

std::vector<uint64_t> EpsilonTable::overflow_sizes() const {
  std::vector<uint64_t> out;
  out.reserve(S_);
  for (const Sub& s : subs_) out.push_back(s.in_a + s.in_b);
  return out;
}

EpsilonReport EpsilonTable::check() const {
  EpsilonReport rep;
  auto fail = [&](std::string msg) { rep.violations.push_back(std::move(msg)); };
  const std::vector<uint64_t> arr = slots();
  std::unordered_set<uint64_t> seen;
  uint64_t count = 0;
  for (uint64_t k : arr) {
    if (k == kEmpty) {
      ++rep.empty_slots;
      continue;
    }
    ++count;
    if (!seen.insert(k).second) fail("key stored twice");
  }
  if (count != n_) fail("cached size disagrees with the array");

  if (mode_ == EpsilonMode::Plain) {
    for (const auto& v : plain_->check().violations) fail("plain: " + v);
    return rep;
  }
  if (arr.size() != hbase() + Z_) fail("array length disagrees with the layout");
  if (Z_ != region_z(n_)) fail("subtable region size disagrees with n");
  const double spill = std::max(1.0, opt_.spill_scale);
  const uint64_t allowed =
      static_cast<uint64_t>((2.0 + spill) * opt_.epsilon * static_cast<double>(anchor_)) + S_ + 2;
  if (rep.empty_slots > allowed) fail("more free slots than the load target allows");

  if (mode_ == EpsilonMode::Failure) {
    if (arr[0] == kEmpty) fail("failure mode with an empty mode slot");
    for (uint64_t i = 0; i < S_; ++i)
      if (subs_[i].tree.capacity() != z_of(i, Z_)) fail("subtable shell has the wrong capacity");
    return rep;
  }
  if (arr[0] != kEmpty) fail("mode slot occupied in normal mode");

  std::vector<uint64_t> r(S_, 0);
  for (uint64_t k : seen) ++r[subtable_of(k)];
  std::vector<uint64_t> in_b(S_, 0);
  for (uint64_t j = 0; j < nb_; ++j) {
    const uint64_t k = B_[j];
    if (k == kEmpty) continue;
    ++rep.spilled;
    const uint64_t i = subtable_of(k);
    ++in_b[i];
    for (uint64_t t = home_b(i); t != j; t = (t + 1) % nb_)
      if (B_[t] == kEmpty) {
        fail("spilled key not reachable from its run start");
        break;
      }
  }
  for (uint64_t i = 0; i < S_; ++i) {
    const Sub& s = subs_[i];
    const uint64_t z = z_of(i, Z_);
    uint64_t in_a = 0;
    for (uint64_t j = 0; j < a_; ++j) {
      const uint64_t k = A_[i * a_ + j];
      if (k == kEmpty) continue;
      ++in_a;
      if (subtable_of(k) != i) fail("overflow array holds a key of another subtable");
      for (uint64_t t = home_a(k); t != j; t = (t + 1) % a_)
        if (A_[i * a_ + t] == kEmpty) {
          fail("overflow key not reachable from its home");
          break;
        }
    }
    if (in_a != s.in_a || in_b[i] != s.in_b) fail("cached overflow counts disagree with the arrays");
    if (s.in_b && s.in_a != a_) fail("subtable spills into B while its own array has room");
    const uint64_t o = s.in_a + s.in_b;
    if (o != (r[i] > z ? r[i] - z : 0)) fail("overflow size is not max(0, r_i - z_i) for subtable " + std::to_string(i));
    if (s.under) {
      ++rep.underfilled;
      if (s.raw.size() != z) fail("under-filled subtable has the wrong capacity");
      else if (s.raw[0] != kEmpty) fail("under-filled subtable uses its first slot");
      if (o) fail("under-filled subtable has overflow keys");
      if (s.tree.capacity() != z) fail("under-filled subtable shell has the wrong capacity");
      for (uint64_t k : s.raw)
        if (k != kEmpty && subtable_of(k) != i) fail("subtable holds a foreign key");
    } else {
      if (s.tree.is_shell() || s.tree.size() != z || s.tree.capacity() != z) fail("subtable is not a full table of z_i keys");
      for (const auto& v : s.tree.check().violations) fail("subtable " + std::to_string(i) + ": " + v);
      for (uint64_t k : s.tree.slots())
        if (k != kEmpty && subtable_of(k) != i) fail("subtable holds a foreign key");
    }
  }
  return rep;
}

void EpsilonTable::adopt(const std::vector<uint64_t>& arr, uint64_t anchor) {
  if (!opt_.fixed_anchor && !sched_) sched_.emplace(anchor, seed_);
  subs_.clear();
  plain_.reset();
  configure(anchor);
  n_ = 0;
  for (uint64_t k : arr)
    if (k != kEmpty) ++n_;
  if (mode_ == EpsilonMode::Plain) {
    const uint64_t base = sched_ ? sched_->base() : std::max<uint64_t>(4, anchor * 85 / 100);
    plain_ = std::make_unique<ResizableTree>(base, seed_, opt_.tree);
    plain_->adopt(arr);
    return;
  }
  Z_ = region_z(n_);
  require(arr.size() == hbase() + Z_, "adopt: array length disagrees with the layout for this anchor");
  for (uint64_t i = 0; i < S_; ++i) subs_.push_back(make_sub(i));
  A_.assign(S_ * a_, kEmpty);
  B_.assign(nb_, kEmpty);
  if (arr[0] != kEmpty) {
    mode_ = EpsilonMode::Failure;
    shell_subs();
    fail_ = arr;
    return;
  }
  mode_ = EpsilonMode::Normal;
  std::copy(arr.begin() + 1, arr.begin() + 1 + static_cast<std::ptrdiff_t>(nb_), B_.begin());
  std::copy(arr.begin() + 1 + static_cast<std::ptrdiff_t>(nb_), arr.begin() + static_cast<std::ptrdiff_t>(hbase()),
            A_.begin());
  for (uint64_t i = 0; i < S_; ++i) {
    Sub& s = subs_[i];
    for (uint64_t j = 0; j < a_; ++j) s.in_a += A_[i * a_ + j] != kEmpty;
    const uint64_t z = z_of(i, Z_);
    std::vector<uint64_t> local(z);
    for (uint64_t p = 0; p < z; ++p) local[p] = arr[hpos(i, p)];
    if (local[0] == kEmpty) {
      s.raw = std::move(local);
      s.under = true;
      s.tree.shell(z);
    } else {
      s.tree.adopt(local);
    }
  }
  for (uint64_t k : B_)
    if (k != kEmpty) ++subs_[subtable_of(k)].in_b;
}

// ------------------------------------------------------- fixed-capacity form

FixedCapacityTable::FixedCapacityTable(uint64_t capacity, double epsilon, uint64_t seed)
    : N_(capacity), epsilon_(epsilon), seed_(seed), lin_(ProbeKind::Linear, capacity, seed, epsilon) {
  require(capacity >= 64, "FixedCapacityTable: capacity must be at least 64");
  require(epsilon > 0.0 && epsilon <= 0.1, "FixedCapacityTable: epsilon must lie in (0, 0.1]");
  Rng rng(derive_master(derive_master(seed, static_cast<uint64_t>(Domain::Threshold)), 1));
  const double u = rng.unit();
  T_ = static_cast<uint64_t>(std::floor(0.9 * static_cast<double>(N_) + 0.05 * static_cast<double>(N_) * u));
  max_n_ = static_cast<uint64_t>(std::floor((1.0 - epsilon) * static_cast<double>(N_)));
}

std::vector<uint64_t> FixedCapacityTable::keys() const {
  std::vector<uint64_t> out;
  out.reserve(n_);
  for (uint64_t k : slots())
    if (k != kEmpty && k != kTombstone) out.push_back(k);
  return out;
}

std::vector<uint64_t> FixedCapacityTable::slots() const {
  if (mode_ == Mode::Linear) return lin_.slots();
  std::vector<uint64_t> out = eps_->slots();
  out.resize(N_, kEmpty);
  return out;
}

OpReceipt FixedCapacityTable::switch_to(Mode m, const std::vector<uint64_t>& keys) {
  std::vector<uint64_t> before = slots();
  for (uint64_t& k : before)
    if (k == kTombstone) k = kEmpty;
  OpReceipt inner;
  if (m == Mode::Linear) {
    eps_.reset();
    lin_ = ProbingTable(ProbeKind::Linear, N_, seed_, epsilon_);
    inner = lin_.build(keys);
  } else {
    EpsilonOptions o;
    o.epsilon = epsilon_ / 4;
    o.fixed_anchor = static_cast<uint64_t>(std::floor(0.95 * static_cast<double>(N_)));
    EpsilonTable t(o, seed_);
    inner = t.build(keys);
    if (t.slot_count() > N_) throw CapacityError("epsilon-table layout does not fit in the fixed capacity");
    eps_.emplace(std::move(t));
    lin_ = ProbingTable(ProbeKind::Linear, N_, seed_, epsilon_);
  }
  if (m != mode_) ++switches_;
  mode_ = m;
  n_ = keys.size();
  OpReceipt r = diff_receipt(before, slots());
  r.probes = inner.probes;
  r.wall_steps = inner.wall_steps + N_;
  r.rebuilds.push_back({0, N_, m == Mode::Linear ? "to-linear" : "to-epsilon"});
  return r;
}

OpReceipt FixedCapacityTable::build(const std::vector<uint64_t>& keys) {
  if (keys.size() > max_n_) throw CapacityError("build: more keys than the load limit allows");
  return switch_to(keys.size() > T_ ? Mode::Epsilon : Mode::Linear, keys);
}

OpReceipt FixedCapacityTable::insert(uint64_t key) {
  require(key != kEmpty && key != kTombstone, "insert: reserved key value");
  if (contains(key)) throw KeyError("insert: key already present");
  if (n_ + 1 > max_n_) throw CapacityError("insert: table is at its load limit");
  if (mode_ == Mode::Linear && n_ + 1 > T_) {
    std::vector<uint64_t> ks = keys();
    ks.push_back(key);
    return switch_to(Mode::Epsilon, ks);
  }
  OpReceipt r = mode_ == Mode::Linear ? lin_.insert(key) : eps_->insert(key);
  ++n_;
  return r;
}

OpReceipt FixedCapacityTable::erase(uint64_t key) {
  if (!contains(key)) throw KeyError("erase: key not present");
  if (mode_ == Mode::Epsilon && n_ - 1 <= T_) {
    std::vector<uint64_t> ks = keys();
    ks.erase(std::find(ks.begin(), ks.end(), key));
    return switch_to(Mode::Linear, ks);
  }
  OpReceipt r = mode_ == Mode::Linear ? lin_.erase(key) : eps_->erase(key);
  --n_;
  return r;
}

QueryResult FixedCapacityTable::query(uint64_t key, std::vector<uint64_t>* log) const {
  return mode_ == Mode::Linear ? lin_.query(key, log) : eps_->query(key, log);
}

std::vector<uint64_t> FixedCapacityTable::probe_sequence(uint64_t key, uint64_t limit) const {
  return mode_ == Mode::Linear ? lin_.probe_sequence(key, limit) : eps_->probe_sequence(key, limit);
}

uint64_t FixedCapacityTable::probe_complexity(uint64_t key) const {
  const QueryResult q = query(key);
  return q.found ? q.probes : 0;
}

std::vector<std::string> FixedCapacityTable::check() const {
  std::vector<std::string> out;
  if ((mode_ == Mode::Epsilon) != (n_ > T_)) out.push_back("mode does not match the key count");
  if (n_ > max_n_) out.push_back("more keys than the load limit");
  if (mode_ == Mode::Linear) {
    for (const auto& v : lin_.check().violations) out.push_back("linear: " + v);
    if (lin_.size() != n_) out.push_back("linear table size disagrees");
  } else {
    for (const auto& v : eps_->check().violations) out.push_back("epsilon: " + v);
    if (eps_->size() != n_) out.push_back("epsilon table size disagrees");
    if (eps_->slot_count() > N_) out.push_back("epsilon table overruns the capacity");
  }
  return out;
}

}  // namespace rainbow
