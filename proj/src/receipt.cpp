#include "rainbow/receipt.hpp"

#include <unordered_map>

namespace rainbow {

namespace {

std::vector<Move> compose(const std::vector<Move>& trail) {
  std::vector<Move> out;
  std::unordered_map<uint64_t, size_t> index;
  index.reserve(trail.size() * 2);
  for (const Move& m : trail) {
    auto [it, fresh] = index.try_emplace(m.key, out.size());
    if (fresh) {
      out.push_back(m);
    } else {
      out[it->second].to = m.to;
    }
  }
  return out;
}

}  // namespace

std::vector<Move> OpReceipt::net_moves() const {
  std::vector<Move> out;
  for (const Move& m : compose(trail))
    if (m.to != kNoSlot && m.to != m.from) out.push_back(m);
  return out;
}

std::vector<Move> OpReceipt::erased() const {
  std::vector<Move> out;
  for (const Move& m : compose(trail))
    if (m.to == kNoSlot && m.from != kNoSlot) out.push_back(m);
  return out;
}

void OpReceipt::absorb(const OpReceipt& other) {
  probes += other.probes;
  wall_steps += other.wall_steps;
  fallback = fallback || other.fallback;
  trail.insert(trail.end(), other.trail.begin(), other.trail.end());
  rebuilds.insert(rebuilds.end(), other.rebuilds.begin(), other.rebuilds.end());
}

}  // namespace rainbow
