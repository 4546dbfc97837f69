#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "rainbow/receipt.hpp"

namespace testsupport {

// Apply a receipt's net moves to a copy of the pre-state array, resized to
// `post_size` slots when the operation changes the array length.
inline std::vector<uint64_t> replay(const std::vector<uint64_t>& pre, const rainbow::OpReceipt& r,
                                    size_t post_size = 0) {
  std::vector<uint64_t> post = pre;
  post.resize(std::max(pre.size(), post_size), rainbow::kEmpty);
  const auto net = r.net_moves();
  for (const auto& m : net)
    if (m.from != rainbow::kNoSlot) post[m.from] = rainbow::kEmpty;
  for (const auto& m : r.erased())
    if (m.from != rainbow::kNoSlot) post[m.from] = rainbow::kEmpty;
  for (const auto& m : net) post.at(m.to) = m.key;
  if (post_size) post.resize(post_size);
  return post;
}

// Distinct nonzero keys from a splitmix stream.
inline std::vector<uint64_t> fresh_keys(uint64_t seed, size_t count) {
  std::vector<uint64_t> out;
  std::unordered_map<uint64_t, bool> seen;
  uint64_t s = seed;
  while (out.size() < count) {
    s += 0x9E3779B97F4A7C15ULL;
    uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    if (z != 0 && seen.emplace(z, true).second) out.push_back(z);
  }
  return out;
}

}  // namespace testsupport
