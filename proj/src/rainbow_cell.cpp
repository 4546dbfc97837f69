#include "rainbow/rainbow_cell.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "rainbow/errors.hpp"
#include "rainbow/geometry.hpp"

namespace rainbow {

CellParams CellParams::make(uint64_t b, uint64_t rainbow_threshold) {
  require(b >= 1, "CellParams: size must be positive");
  CellParams p;
  p.size = b;
  p.bucket_size = b;
  if (b < rainbow_threshold || b < 32) return p;
  const uint64_t nb = std::max<uint64_t>(1, pow2_floor(static_cast<uint64_t>(std::floor(std::pow(static_cast<double>(b), 0.25)))));
  if (b % nb != 0) return p;
  const uint64_t B = b / nb;
  const auto want = static_cast<uint64_t>(std::ceil(24.0 * std::sqrt(static_cast<double>(B))));
  const uint64_t S = std::clamp<uint64_t>(pow2_ceil(want), 4, B / 2);
  p.num_buckets = nb;
  p.bucket_size = B;
  p.sky_size = S;
  p.flat = false;
  return p;
}

RainbowCell::RainbowCell(std::vector<uint64_t>* array, uint64_t offset, CellParams params, uint64_t master)
    : arr_(array), off_(offset), p_(params), master_(master) {
  require(arr_ != nullptr && off_ + p_.size <= arr_->size(), "RainbowCell: window outside the array");
  status_seed_ = seed_for(derive_master(master, 1), Domain::Status);
  bucket_seed_ = seed_for(derive_master(master, 2), Domain::Bucket);
  rng_ = Rng(derive_master(master, 3));
  adopt();
}

void RainbowCell::adopt() {
  heavy_.assign(p_.flat ? 0 : p_.num_buckets, 0);
  bad_ = p_.flat ? 0 : p_.num_buckets;
  count_ = 0;
  holes_.clear();
  for (uint64_t i = p_.size; i-- > 0;) {
    if (at(i) == kEmpty) holes_.push_back(i);
    else count_in(at(i), +1);
  }
  failed_ = false;
  if (!p_.flat && at(p_.bucket_size - 2) != kEmpty && at(p_.bucket_size - 1) != kEmpty) failed_ = read_bit(0);
}

bool RainbowCell::heavy(uint64_t key) const {
  if (p_.flat) return true;
  return !bernoulli(status_seed_, key, p_.light_num(), p_.light_den());
}

uint64_t RainbowCell::bucket(uint64_t key) const {
  if (p_.flat) return 0;
  return uniform_below(bucket_seed_, key, p_.num_buckets);
}

bool RainbowCell::in_range(uint64_t h) const {
  return h + p_.sky_size >= p_.bucket_size && h <= p_.bucket_size;
}

void RainbowCell::count_in(uint64_t key, int delta) {
  count_ = delta > 0 ? count_ + 1 : count_ - 1;
  if (p_.flat || !heavy(key)) return;
  const uint64_t j = bucket(key);
  const bool was = in_range(heavy_[j]);
  heavy_[j] = delta > 0 ? heavy_[j] + 1 : heavy_[j] - 1;
  const bool now = in_range(heavy_[j]);
  if (was && !now) ++bad_;
  if (!was && now) --bad_;
}

void RainbowCell::forget_hole(uint64_t local) {
  auto it = std::find(holes_.begin(), holes_.end(), local);
  if (it == holes_.end()) throw InvariantError("cell hole list out of sync");
  *it = holes_.back();
  holes_.pop_back();
}

void RainbowCell::move_local(uint64_t from, uint64_t to, OpReceipt& r) {
  const uint64_t key = slot(from);
  if (key == kEmpty || slot(to) != kEmpty) throw InvariantError("cell move between invalid slots");
  slot(to) = key;
  slot(from) = kEmpty;
  forget_hole(to);
  holes_.push_back(from);
  r.record(key, off_ + from, off_ + to);
  ++r.wall_steps;
}

bool RainbowCell::read_bit(uint64_t j) const {
  const uint64_t d0 = j * p_.bucket_size + p_.bucket_size - 2;
  return at(d0) > at(d0 + 1);
}

void RainbowCell::write_bit(uint64_t j, bool value, OpReceipt& r) {
  const uint64_t d0 = j * p_.bucket_size + p_.bucket_size - 2;
  const uint64_t a = slot(d0), b = slot(d0 + 1);
  if (a == kEmpty || b == kEmpty) throw InvariantError("designated cell slot is empty");
  if ((a > b) == value) return;
  slot(d0) = b;
  slot(d0 + 1) = a;
  r.record(a, off_ + d0, off_ + d0 + 1);
  r.record(b, off_ + d0 + 1, off_ + d0);
  r.wall_steps += 2;
}

namespace {
enum class Want { HeavyOf, Light, Any };
}

uint64_t RainbowCell::find_in_sky(uint64_t j, bool want_light, bool non_designated_only, OpReceipt& r) {
  // want_light selects lights; otherwise heavy keys of bucket j, except when
  // non_designated_only is set, where any key qualifies.
  const Want want = non_designated_only ? Want::Any : (want_light ? Want::Light : Want::HeavyOf);
  const uint64_t base = j * p_.bucket_size + p_.bucket_size - p_.sky_size;
  const uint64_t span = non_designated_only ? p_.sky_size - 2 : p_.sky_size;
  auto ok = [&](uint64_t local) {
    const uint64_t k = at(local);
    if (k == kEmpty) return false;
    switch (want) {
      case Want::Any: return true;
      case Want::Light: return !heavy(k);
      case Want::HeavyOf: return heavy(k) && bucket(k) == j;
    }
    return false;
  };
  for (uint64_t t = 0; t < span; ++t) {
    const uint64_t local = base + rng_.below(span);
    ++r.probes;
    if (ok(local)) return local;
  }
  for (uint64_t t = 0; t < span; ++t) {
    ++r.probes;
    if (ok(base + t)) return base + t;
  }
  return kNoSlot;
}

void RainbowCell::settle_hole(uint64_t hole, OpReceipt& r) {
  if (!p_.is_designated(hole)) return;
  const uint64_t j = p_.bucket_of_slot(hole);
  uint64_t src = find_in_sky(j, false, true, r);
  if (src == kNoSlot) {
    for (uint64_t local = 0; local < p_.size && src == kNoSlot; ++local) {
      ++r.probes;
      if (p_.is_sky(local) && !p_.is_designated(local) && at(local) != kEmpty && !heavy(at(local))) src = local;
    }
  }
  if (src == kNoSlot) throw InvariantError("cell too sparse to refill a designated slot");
  move_local(src, hole, r);
  write_bit(j, failed_, r);
}

void RainbowCell::remove_at(uint64_t local, OpReceipt& r) {
  require(local < p_.size, "remove_at: slot out of range");
  const uint64_t key = slot(local);
  require(key != kEmpty, "remove_at: slot is empty");
  slot(local) = kEmpty;
  holes_.push_back(local);
  r.record(key, off_ + local, kNoSlot);
  ++r.wall_steps;
  count_in(key, -1);
  if (p_.flat) return;
  if (failed_ || bad_ > 0) {
    after_change(r);
    return;
  }
  uint64_t hole = local;
  if (!p_.is_sky(hole)) {
    const uint64_t j = p_.bucket_of_slot(hole);
    const uint64_t src = find_in_sky(j, false, false, r);
    if (src == kNoSlot) throw InvariantError("no heavy key in the sky of a bucket with spare heavy keys");
    move_local(src, hole, r);
    hole = src;
  }
  settle_hole(hole, r);
}

void RainbowCell::place(uint64_t key, OpReceipt& r) {
  require(key != kEmpty, "place: key 0 is reserved");
  require(!holes_.empty(), "place: cell is full");
  ++r.wall_steps;
  count_in(key, +1);
  auto put = [&](uint64_t h) {
    slot(h) = key;
    forget_hole(h);
    r.record(key, kNoSlot, off_ + h);
  };
  if (p_.flat) {
    put(holes_.back());
    return;
  }
  if (failed_ || bad_ > 0) {
    uint64_t h = holes_.back();
    for (uint64_t c : holes_)
      if (!p_.is_designated(c)) h = c;
    put(h);
    after_change(r);
    return;
  }
  if (!heavy(key)) {
    put(holes_.back());
    return;
  }
  const uint64_t j = bucket(key);
  for (uint64_t h : holes_) {
    if (p_.bucket_of_slot(h) == j) {
      put(h);
      return;
    }
  }
  const uint64_t z = find_in_sky(j, true, false, r);
  if (z == kNoSlot) throw InvariantError("no light key in the sky of a bucket with room");
  move_local(z, holes_.back(), r);
  put(z);
  if (p_.is_designated(z)) write_bit(j, false, r);
}

void RainbowCell::update(uint64_t local, uint64_t key, OpReceipt& r) {
  remove_at(local, r);
  place(key, r);
}

void RainbowCell::lift(uint64_t local, OpReceipt& r) {
  require(local < p_.size, "lift: slot out of range");
  const uint64_t key = slot(local);
  require(key != kEmpty, "lift: slot is empty");
  slot(local) = kEmpty;
  holes_.push_back(local);
  r.record(key, off_ + local, kNoSlot);
  ++r.wall_steps;
  count_in(key, -1);
}

void RainbowCell::absorb(const std::vector<uint64_t>& incoming, OpReceipt& r) {
  require(incoming.size() <= holes_.size(), "absorb: more keys than holes");
  std::sort(holes_.begin(), holes_.end(), std::greater<>());
  for (uint64_t key : incoming) {
    require(key != kEmpty, "absorb: key 0 is reserved");
    const uint64_t h = holes_.back();
    holes_.pop_back();
    slot(h) = key;
    r.record(key, kNoSlot, off_ + h);
    ++r.wall_steps;
    count_in(key, +1);
  }
  if (p_.flat) return;
  if (bad_ > 0) {
    failure_layout(r);
  } else {
    failed_ = false;
    relayout(r);
  }
}

void RainbowCell::swap_local(uint64_t a, uint64_t b, OpReceipt& r) {
  require(p_.flat, "swap_local: only flat cells have free placement");
  require(a < p_.size && b < p_.size, "swap_local: slot out of range");
  if (a == b) return;
  const uint64_t ka = at(a), kb = at(b);
  if (ka == kb) return;
  slot(a) = kb;
  slot(b) = ka;
  for (auto& h : holes_) {
    if (h == a) h = b;
    else if (h == b) h = a;
  }
  if (ka != kEmpty) r.record(ka, off_ + a, off_ + b);
  if (kb != kEmpty) r.record(kb, off_ + b, off_ + a);
  r.wall_steps += 2;
}

void RainbowCell::init(const std::vector<uint64_t>& keys, OpReceipt& r) {
  for (uint64_t local = 0; local < p_.size; ++local)
    if (at(local) != kEmpty) lift(local, r);
  absorb(keys, r);
}

void RainbowCell::after_change(OpReceipt& r) {
  r.wall_steps += p_.size;
  r.fallback = true;
  if (bad_ > 0) {
    failure_layout(r);
  } else {
    failed_ = false;
    relayout(r);
  }
}

void RainbowCell::failure_layout(OpReceipt& r) {
  failed_ = true;
  const uint64_t B = p_.bucket_size;
  for (uint64_t j = 0; j < p_.num_buckets; ++j) {
    for (uint64_t d = j * B + B - 2; d < j * B + B; ++d) {
      if (at(d) != kEmpty) continue;
      uint64_t src = kNoSlot;
      for (uint64_t local = 0; local < p_.size && src == kNoSlot; ++local)
        if (at(local) != kEmpty && !p_.is_designated(local)) src = local;
      if (src == kNoSlot) throw InvariantError("cell too sparse to encode its indicator");
      move_local(src, d, r);
    }
    write_bit(j, true, r);
  }
}

void RainbowCell::relayout(OpReceipt& r) {
  const uint64_t b = p_.size, B = p_.bucket_size, S = p_.sky_size, nb = p_.num_buckets;
  r.wall_steps += b;
  std::vector<uint64_t> cur(b), nl(b, kEmpty);
  for (uint64_t i = 0; i < b; ++i) cur[i] = at(i);

  std::vector<std::vector<uint64_t>> heavy_of(nb);  // positions of heavy keys by bucket
  std::vector<uint64_t> lights;                     // positions of light keys
  for (uint64_t i = 0; i < b; ++i) {
    if (cur[i] == kEmpty) continue;
    if (heavy(cur[i])) heavy_of[bucket(cur[i])].push_back(i);
    else lights.push_back(i);
  }
  std::vector<uint64_t> room(nb);
  for (uint64_t j = 0; j < nb; ++j) {
    if (heavy_of[j].size() > B || heavy_of[j].size() + S < B) throw InvariantError("relayout on a cell in full failure");
    room[j] = B - heavy_of[j].size();
  }
  // Lights already in some sky keep their bucket while it has room.
  std::vector<std::vector<uint64_t>> lights_for(nb);  // incoming light keys by bucket
  std::vector<char> kept(b, 0);
  std::vector<uint64_t> displaced;
  for (uint64_t pos : lights) {
    const uint64_t j = pos / B;
    if (p_.is_sky(pos) && room[j] > 0) {
      --room[j];
      kept[pos] = 1;
    } else {
      displaced.push_back(cur[pos]);
    }
  }
  {
    uint64_t j = 0;
    for (uint64_t key : displaced) {
      while (room[j] == 0) ++j;
      --room[j];
      lights_for[j].push_back(key);
    }
  }
  for (uint64_t j = 0; j < nb; ++j) {
    const uint64_t lo = j * B, sky_lo = lo + B - S, hi = lo + B;
    std::vector<uint64_t> incoming;  // heavy keys of j currently outside bucket j
    for (uint64_t pos : heavy_of[j]) {
      if (pos >= lo && pos < hi) nl[pos] = cur[pos];
      else incoming.push_back(cur[pos]);
    }
    for (uint64_t pos = sky_lo; pos < hi; ++pos)
      if (kept[pos]) nl[pos] = cur[pos];
    size_t next_in = 0;
    for (uint64_t pos = lo; pos < sky_lo; ++pos) {
      if (nl[pos] != kEmpty) continue;
      if (next_in < incoming.size()) {
        nl[pos] = incoming[next_in++];
        continue;
      }
      // Pull a heavy key of j down from the sky, non-designated slots first.
      uint64_t src = kNoSlot;
      for (uint64_t q = hi - 3; q + 1 > sky_lo && src == kNoSlot; --q)
        if (nl[q] != kEmpty && heavy(nl[q]) && bucket(nl[q]) == j) src = q;
      for (uint64_t q = hi - 2; q < hi && src == kNoSlot; ++q)
        if (nl[q] != kEmpty && heavy(nl[q]) && bucket(nl[q]) == j) src = q;
      if (src == kNoSlot) throw InvariantError("relayout: bucket short of heavy keys");
      nl[pos] = nl[src];
      nl[src] = kEmpty;
    }
    std::vector<uint64_t> rest(incoming.begin() + static_cast<long>(next_in), incoming.end());
    rest.insert(rest.end(), lights_for[j].begin(), lights_for[j].end());
    size_t next_rest = 0;
    for (uint64_t pos = hi - 2; pos < hi; ++pos)
      if (nl[pos] == kEmpty && next_rest < rest.size()) nl[pos] = rest[next_rest++];
    for (uint64_t pos = sky_lo; pos < hi - 2 && next_rest < rest.size(); ++pos)
      if (nl[pos] == kEmpty) nl[pos] = rest[next_rest++];
    if (next_rest != rest.size()) throw InvariantError("relayout: bucket overflow");
    for (uint64_t pos = hi - 2; pos < hi; ++pos) {
      if (nl[pos] != kEmpty) continue;
      uint64_t src = kNoSlot;
      for (uint64_t q = sky_lo; q < hi - 2 && src == kNoSlot; ++q)
        if (nl[q] != kEmpty) src = q;
      if (src == kNoSlot) throw InvariantError("relayout: cannot fill designated slot");
      nl[pos] = nl[src];
      nl[src] = kEmpty;
    }
  }
  std::unordered_map<uint64_t, uint64_t> old_pos;
  old_pos.reserve(b * 2);
  for (uint64_t i = 0; i < b; ++i)
    if (cur[i] != kEmpty) old_pos.emplace(cur[i], i);
  holes_.clear();
  for (uint64_t i = 0; i < b; ++i) {
    slot(i) = nl[i];
    if (nl[i] == kEmpty) {
      holes_.push_back(i);
      continue;
    }
    const uint64_t from = old_pos.at(nl[i]);
    if (from != i) r.record(nl[i], off_ + from, off_ + i);
  }
  for (uint64_t j = 0; j < nb; ++j) write_bit(j, false, r);
}

void RainbowCell::primary(uint64_t key, std::vector<uint64_t>& out) const {
  if (p_.flat) {
    for (uint64_t i = 0; i < p_.size; ++i) out.push_back(i);
    return;
  }
  const uint64_t B = p_.bucket_size, S = p_.sky_size, j0 = bucket(key);
  if (heavy(key)) {
    for (uint64_t i = j0 * B; i < (j0 + 1) * B; ++i) out.push_back(i);
    return;
  }
  for (uint64_t t = 0; t < p_.num_buckets; ++t) {
    const uint64_t j = (j0 + t) % p_.num_buckets;
    for (uint64_t i = j * B + B - S; i < (j + 1) * B; ++i) out.push_back(i);
  }
}

CellScan RainbowCell::scan_primary(uint64_t key, uint64_t& probes, std::vector<uint64_t>* log) const {
  CellScan s;
  auto probe = [&](uint64_t local) {
    ++probes;
    if (log) log->push_back(off_ + local);
    return at(local) == key;
  };
  if (p_.flat) {
    for (uint64_t i = 0; i < p_.size; ++i)
      if (probe(i)) return {true, i, false};
    return s;
  }
  const uint64_t B = p_.bucket_size, S = p_.sky_size, j0 = bucket(key);
  if (heavy(key)) {
    for (uint64_t i = j0 * B; i < (j0 + 1) * B; ++i)
      if (probe(i)) return {true, i, false};
  } else {
    for (uint64_t t = 0; t < p_.num_buckets; ++t) {
      const uint64_t j = (j0 + t) % p_.num_buckets;
      for (uint64_t i = j * B + B - S; i < (j + 1) * B; ++i)
        if (probe(i)) return {true, i, false};
    }
  }
  s.failure_seen = read_bit(j0);
  return s;
}

CellScan RainbowCell::query(uint64_t key, uint64_t& probes, std::vector<uint64_t>* log) const {
  CellScan s = scan_primary(key, probes, log);
  if (s.found || !s.failure_seen) return s;
  for (uint64_t i = 0; i < p_.size; ++i) {
    ++probes;
    if (log) log->push_back(off_ + i);
    if (at(i) == key) return {true, i, true};
  }
  return s;
}

std::vector<uint64_t> RainbowCell::probe_sequence(uint64_t key) const {
  std::vector<uint64_t> seq;
  primary(key, seq);
  for (uint64_t i = 0; i < p_.size; ++i) seq.push_back(i);
  for (auto& s : seq) s += off_;
  return seq;
}

CellReport RainbowCell::check() const {
  CellReport rep;
  rep.cached_failure = failed_;
  uint64_t n = 0;
  std::vector<uint64_t> h(p_.flat ? 0 : p_.num_buckets, 0);
  for (uint64_t i = 0; i < p_.size; ++i) {
    const uint64_t k = at(i);
    if (k == kEmpty) continue;
    ++n;
    if (!p_.flat && heavy(k)) ++h[bucket(k)];
  }
  if (n != count_) rep.violations.push_back("cached key count disagrees with the array");
  if (holes_.size() != p_.size - n) rep.violations.push_back("cached hole list disagrees with the array");
  if (p_.flat) return rep;
  if (h != heavy_) rep.violations.push_back("cached heavy counts disagree with the array");
  const uint64_t B = p_.bucket_size, S = p_.sky_size;
  for (uint64_t j = 0; j < p_.num_buckets; ++j) {
    if (!in_range(h[j])) ++rep.out_of_range_buckets;
    else if (3 * h[j] + 2 * S < 3 * B || 3 * h[j] + S > 3 * B) ++rep.unfriendly_buckets;
  }
  bool first = true;
  for (uint64_t j = 0; j < p_.num_buckets; ++j) {
    const uint64_t d0 = j * B + B - 2;
    if (at(d0) == kEmpty || at(d0 + 1) == kEmpty) {
      rep.violations.push_back("designated slot empty in bucket " + std::to_string(j));
      continue;
    }
    const bool bit = read_bit(j);
    if (first) rep.encoded_failure = bit;
    else if (bit != rep.encoded_failure) rep.violations.push_back("buckets disagree on the failure indicator");
    first = false;
  }
  if (rep.encoded_failure != failed_) rep.violations.push_back("indicator cache disagrees with the encoding");
  if (rep.encoded_failure != (rep.out_of_range_buckets > 0))
    rep.violations.push_back("indicator does not match whether a common-case layout exists");
  if (!rep.encoded_failure) {
    for (uint64_t i = 0; i < p_.size; ++i) {
      const uint64_t k = at(i);
      if (k == kEmpty) {
        if (!p_.is_sky(i) || p_.is_designated(i)) rep.violations.push_back("hole outside the free sky at " + std::to_string(i));
      } else if (heavy(k)) {
        if (bucket(k) != p_.bucket_of_slot(i)) rep.violations.push_back("heavy key outside its bucket at " + std::to_string(i));
      } else if (!p_.is_sky(i)) {
        rep.violations.push_back("light key outside the sky at " + std::to_string(i));
      }
    }
  }
  return rep;
}

}  // namespace rainbow
