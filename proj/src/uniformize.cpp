#include "rainbow/uniformize.hpp"

#include <algorithm>
#include <cmath>

#include "rainbow/errors.hpp"
#include "rainbow/hash_suite.hpp"

namespace rainbow {

std::string to_string(ProbeFamily f) {
  switch (f) {
    case ProbeFamily::Permutation:
      return "permutation";
    case ProbeFamily::Linear:
      return "linear";
    case ProbeFamily::DoubleHash:
      return "double-hash";
    case ProbeFamily::SkewedFirst:
      return "skewed-first";
    case ProbeFamily::SlotZeroFirst:
      return "slot-zero-first";
    case ProbeFamily::Identity:
      return "identity";
    case ProbeFamily::HotSet:
      return "hot-set";
  }
  return "?";
}

ProbeFamily parse_probe_family(const std::string& name) {
  for (ProbeFamily f : {ProbeFamily::Permutation, ProbeFamily::Linear, ProbeFamily::DoubleHash,
                        ProbeFamily::SkewedFirst, ProbeFamily::SlotZeroFirst, ProbeFamily::Identity,
                        ProbeFamily::HotSet})
    if (to_string(f) == name) return f;
  throw ContractError("unknown probe family: " + name);
}

bool adversarial(ProbeFamily f) {
  return f == ProbeFamily::SlotZeroFirst || f == ProbeFamily::Identity || f == ProbeFamily::HotSet;
}

ProbeFunction make_probe_function(ProbeFamily family, uint64_t universe, uint64_t slots, uint64_t length,
                                  uint64_t seed) {
  require(universe >= 1 && universe <= kMaxUniverse, "probe function: universe must lie in [1, 2^20]");
  require(slots >= 8 && slots < ProbeFunction::kNull, "probe function: need at least 8 slots");
  require(length >= 1 && length <= slots / 2, "probe function: length must lie in [1, slots / 2]");
  ProbeFunction h;
  h.universe = universe;
  h.slots = slots;
  h.length = length;
  h.table.resize(universe * length);
  std::vector<uint64_t> stamp(slots, 0);
  for (uint64_t x = 0; x < universe; ++x) {
    Rng rng(derive_master(seed, x));
    uint32_t* out = &h.table[x * length];
    uint64_t j = 0;
    auto take = [&](uint64_t s) {
      stamp[s] = x + 1;
      out[j++] = static_cast<uint32_t>(s);
    };
    // Distinct uniform slots for the rest of the sequence.
    auto fill_distinct = [&] {
      while (j < length) {
        const uint64_t s = rng.below(slots);
        if (stamp[s] != x + 1) take(s);
      }
    };
    switch (family) {
      case ProbeFamily::Permutation:
        fill_distinct();
        break;
      case ProbeFamily::Linear: {
        const uint64_t start = rng.below(slots);
        while (j < length) take((start + j) % slots);
        break;
      }
      case ProbeFamily::DoubleHash: {
        const uint64_t start = rng.below(slots);
        const uint64_t step = 2 * rng.below(slots / 2) + 1;
        while (j < length) out[j] = static_cast<uint32_t>((start + j * step) % slots), ++j;
        break;
      }
      case ProbeFamily::SkewedFirst: {
        // Density of the first probe falls off like 1 / (s + 1).
        const auto s = static_cast<uint64_t>(std::exp(rng.unit() * std::log(static_cast<double>(slots) + 1))) - 1;
        take(std::min(s, slots - 1));
        fill_distinct();
        break;
      }
      case ProbeFamily::SlotZeroFirst:
        take(0);
        fill_distinct();
        break;
      case ProbeFamily::Identity:
        while (j < length) take(j);
        break;
      case ProbeFamily::HotSet:
        take(rng.below(4));
        fill_distinct();
        break;
    }
  }
  return h;
}

FlatSequences as_sequences(const ProbeFunction& h) {
  FlatSequences f;
  f.offset.resize(h.universe + 1);
  for (uint64_t x = 0; x <= h.universe; ++x) f.offset[x] = x * h.length;
  f.slot = h.table;
  f.gpos.resize(h.table.size());
  for (uint64_t k = 0; k < f.gpos.size(); ++k) f.gpos[k] = static_cast<uint32_t>(k % h.length + 1);
  return f;
}

std::vector<std::vector<uint32_t>> prefix_counts(const FlatSequences& seqs, uint64_t slots, uint64_t imax) {
  std::vector<std::vector<uint32_t>> cnt(imax + 1, std::vector<uint32_t>(slots, 0));
  const uint64_t universe = seqs.offset.size() - 1;
  std::vector<uint64_t> stamp(slots, 0);
  for (uint64_t x = 0; x < universe; ++x) {
    const uint64_t len = std::min(seqs.size(x), imax);
    for (uint64_t j = 0; j < len; ++j) {
      const uint32_t s = seqs.slot[seqs.offset[x] + j];
      if (s == ProbeFunction::kNull || stamp[s] == x + 1) continue;
      stamp[s] = x + 1;
      ++cnt[j + 1][s];
    }
  }
  for (uint64_t i = 2; i <= imax; ++i)
    for (uint64_t s = 0; s < slots; ++s) cnt[i][s] += cnt[i - 1][s];
  return cnt;
}

namespace {

uint64_t pow_u(uint64_t b, int e) {
  uint64_t r = 1;
  while (e--) r *= b;
  return r;
}

// ceil(sqrt(num / den)) in exact integer arithmetic.
uint64_t ceil_sqrt_ratio(uint64_t num, uint64_t den) {
  auto t = static_cast<uint64_t>(std::ceil(std::sqrt(static_cast<double>(num) / static_cast<double>(den))));
  while (t > 0 && (t - 1) * (t - 1) * den >= num) --t;
  while (t * t * den < num) ++t;
  return t;
}

}  // namespace

UniformizeResult uniformize(const ProbeFunction& h, uint64_t n, uint64_t imax) {
  require(h.universe <= kMaxUniverse, "uniformize: universe too large to enumerate");
  require(n >= 1 && n <= h.universe, "uniformize: n must lie in [1, U]");
  require(imax >= 1, "uniformize: imax must be positive");
  const uint64_t top = std::min(imax, h.length);
  const auto cnt = prefix_counts(as_sequences(h), h.slots, top);

  // target[i][s] = new position for bad pairs, 0 otherwise.
  UniformizeResult out;
  std::vector<std::vector<uint32_t>> target(top + 1, std::vector<uint32_t>(h.slots, 0));
  for (uint64_t i = 1; i <= top; ++i) {
    const uint64_t limit = pow_u(i, 5) * h.universe;
    for (uint64_t s = 0; s < h.slots; ++s) {
      const uint64_t num = n * cnt[i][s];
      if (num <= limit) continue;
      target[i][s] = static_cast<uint32_t>(ceil_sqrt_ratio(num, h.universe));
      ++out.bad_pairs;
    }
  }

  FlatSequences& f = out.flat;
  f.offset.reserve(h.universe + 1);
  f.offset.push_back(0);
  f.slot.reserve(h.table.size());
  f.gpos.reserve(h.table.size());
  std::vector<std::pair<uint32_t, uint32_t>> moved;  // (target, slot)
  std::vector<uint32_t> orig(h.length);
  for (uint64_t x = 0; x < h.universe; ++x) {
    moved.clear();
    for (uint64_t j = 0; j < h.length; ++j) {
      const uint32_t s = h.at(x, j);
      orig[j] = s;
      if (j + 1 <= top && target[j + 1][s]) {
        moved.emplace_back(target[j + 1][s], s);
        orig[j] = ProbeFunction::kNull;
      }
    }
    out.moved += moved.size();
    std::stable_sort(moved.begin(), moved.end(), [](auto a, auto b) { return a.first < b.first; });
    uint64_t G = h.length;
    if (!moved.empty()) G = std::max<uint64_t>(G, moved.back().first);
    out.max_target = std::max(out.max_target, G);
    size_t m = 0;
    for (uint64_t g = 1; g <= G; ++g) {
      f.slot.push_back(g <= h.length ? orig[g - 1] : ProbeFunction::kNull);
      f.gpos.push_back(static_cast<uint32_t>(g));
      for (; m < moved.size() && moved[m].first == g; ++m) {
        f.slot.push_back(moved[m].second);
        f.gpos.push_back(static_cast<uint32_t>(g));
      }
    }
    f.offset.push_back(f.slot.size());
  }
  return out;
}

namespace {

struct Costs {
  uint64_t original = 0, tilde = 0, flat = 0;
};

}  // namespace

Certification certify(const ProbeFunction& h, const UniformizeResult& u, uint64_t n, uint64_t imax,
                      uint64_t assignments, uint64_t seed) {
  const FlatSequences& f = u.flat;
  require(f.offset.size() == h.universe + 1, "certify: transformed function has the wrong universe");
  require(n >= 1 && n <= h.universe, "certify: n must lie in [1, U]");
  Certification c;

  const auto cnt = prefix_counts(f, h.slots, imax);
  for (uint64_t i = 1; i <= imax; ++i) {
    const double bound = 64.0 * std::pow(static_cast<double>(i), 10);
    for (uint64_t s = 0; s < h.slots; ++s) {
      const double q = static_cast<double>(n) * cnt[i][s] / static_cast<double>(h.universe);
      ++c.q_checks;
      c.max_q_ratio = std::max(c.max_q_ratio, q / bound);
      if (q > bound) ++c.q_violations;
    }
  }

  for (uint64_t x = 0; x < h.universe; ++x)
    for (uint64_t k = f.offset[x]; k < f.offset[x + 1]; ++k) {
      if (f.slot[k] == ProbeFunction::kNull) continue;
      const uint64_t idx = k - f.offset[x] + 1;
      ++c.shift_checks;
      if (idx < f.gpos[k] || idx > 2 * uint64_t{f.gpos[k]}) ++c.shift_violations;
    }

  Rng rng(derive_master(seed, static_cast<uint64_t>(Domain::Sampler)));
  std::vector<uint64_t> owner(h.slots, 0);
  std::vector<uint64_t> key_stamp(h.universe, 0);
  std::vector<uint32_t> free_slots;
  for (uint64_t a = 1; a <= assignments; ++a) {
    const bool earliest = a % 2 == 0;
    Costs cost;
    uint64_t picked = 0;
    while (picked < n) {
      const uint64_t x = rng.below(h.universe);
      if (key_stamp[x] == a) continue;
      key_stamp[x] = a;
      ++picked;
      free_slots.clear();
      uint64_t pos = 0;
      for (uint64_t j = 0; j < h.length && (free_slots.empty() || !earliest); ++j) {
        const uint32_t s = h.at(x, j);
        if (owner[s] != a && std::find(free_slots.begin(), free_slots.end(), s) == free_slots.end())
          free_slots.push_back(s);
      }
      if (free_slots.empty()) continue;
      const uint32_t s = earliest ? free_slots.front() : free_slots[rng.below(free_slots.size())];
      owner[s] = a;
      while (h.at(x, pos) != s) ++pos;
      cost.original += pos + 1;
      uint64_t tilde = 0, flat = 0;
      for (uint64_t k = f.offset[x]; k < f.offset[x + 1]; ++k)
        if (f.slot[k] == s) {
          if (!flat) flat = k - f.offset[x] + 1;
          tilde = tilde ? std::min<uint64_t>(tilde, f.gpos[k]) : f.gpos[k];
        }
      if (!flat) throw InvariantError("certify: assigned slot vanished from the transformed sequence");
      cost.tilde += tilde;
      cost.flat += flat;
    }
    ++c.assignments;
    if (cost.flat > 2 * cost.tilde) ++c.flat_violations;
    if (cost.tilde > cost.original + 16 * n) ++c.tilde_violations;
    if (cost.tilde > cost.original) c.worst_tilde_excess = std::max(c.worst_tilde_excess, cost.tilde - cost.original);
  }
  return c;
}

}  // namespace rainbow
