#include "rainbow/resizer.hpp"

#include <cmath>
#include <unordered_map>

#include "rainbow/errors.hpp"

namespace rainbow {

namespace {

double draw_r(uint64_t seed) {
  Rng rng(derive_master(seed, static_cast<uint64_t>(Domain::Threshold)));
  return 0.99 + 0.01 * rng.unit();
}

}  // namespace

ThresholdSchedule::ThresholdSchedule(uint64_t base, uint64_t seed) : base_(base), r_(draw_r(seed)) {
  require(base >= 4, "ThresholdSchedule: base must be at least 4");
}

uint64_t ThresholdSchedule::threshold(int i) const {
  return static_cast<uint64_t>(std::floor(std::pow(1.09, i) * r_ * static_cast<double>(base_)));
}

int ThresholdSchedule::index_for(uint64_t n) const {
  if (n < threshold(0)) throw CapacityError("table cannot hold fewer than " + std::to_string(threshold(0)) + " keys");
  int i = 0;
  while (threshold(i + 1) < n) ++i;
  return i;
}

ResizableTree::ResizableTree(uint64_t base, uint64_t seed, TreeOptions options)
    : sched_(base, seed), seed_(seed), opt_(options), tree_(make_tree(0)) {
  shell_ = true;
}

RainbowTree ResizableTree::make_tree(int index) const { return RainbowTree(threshold(index), seed_, opt_); }

void ResizableTree::shell(uint64_t capacity) {
  index_ = index_for(capacity);
  if (tree_.anchor() != threshold(index_)) tree_ = make_tree(index_);
  tree_.reset_capacity(capacity);
  shell_ = true;
}

std::vector<uint64_t> ResizableTree::keys() const {
  std::vector<uint64_t> out;
  if (shell_) return out;
  out.reserve(size());
  for (uint64_t k : tree_.slots())
    if (k != kEmpty) out.push_back(k);
  return out;
}

OpReceipt ResizableTree::rebuild_all(std::vector<uint64_t> keys) {
  const std::vector<uint64_t> before = shell_ ? std::vector<uint64_t>{} : tree_.slots();
  index_ = index_for(keys.size());
  if (tree_.anchor() != threshold(index_)) {
    tree_ = make_tree(index_);
    ++anchor_rebuilds_;
  }
  tree_.reset_capacity(keys.size());
  OpReceipt inner = tree_.build(keys);
  shell_ = false;
  OpReceipt r = diff_receipt(before, tree_.slots());
  r.probes = inner.probes;
  r.wall_steps = inner.wall_steps + before.size();
  r.rebuilds.push_back({0, keys.size(), "anchor"});
  return r;
}

OpReceipt ResizableTree::build(const std::vector<uint64_t>& keys) {
  shell_ = true;  // the previous contents do not count as moves
  return rebuild_all(keys);
}

bool ResizableTree::maybe_anchor_rebuild(uint64_t new_n) {
  if (shell_ || index_for(new_n) == index_) return false;
  std::vector<uint64_t> ks = keys();
  require(ks.size() == new_n, "maybe_anchor_rebuild: key count must already equal new_n");
  rebuild_all(std::move(ks));
  return true;
}

OpReceipt ResizableTree::grow_insert(uint64_t key) {
  require(!shell_, "grow_insert: table has not been built");
  require(key != kEmpty, "grow_insert: key 0 is reserved");
  if (tree_.contains(key)) throw KeyError("grow_insert: key already present");
  if (index_for(size() + 1) != index_) {
    std::vector<uint64_t> ks = keys();
    ks.push_back(key);
    return rebuild_all(std::move(ks));
  }
  OpReceipt r = tree_.grow();
  r.absorb(tree_.insert(key));
  return r;
}

OpReceipt ResizableTree::shrink_delete(uint64_t key) {
  require(!shell_, "shrink_delete: table has not been built");
  if (!tree_.contains(key)) throw KeyError("shrink_delete: key not present");
  if (index_for(size() - 1) != index_) {
    std::vector<uint64_t> ks = keys();
    ks.erase(std::find(ks.begin(), ks.end(), key));
    return rebuild_all(std::move(ks));
  }
  return tree_.erase_shrink(key);
}

TreeReport ResizableTree::check() const {
  TreeReport rep = tree_.check();
  if (shell_) return rep;
  if (tree_.has_free_slot()) rep.violations.push_back("resizable table has a free slot between operations");
  if (tree_.anchor() != threshold(index_)) rep.violations.push_back("anchor does not match the threshold index");
  if (index_for(size()) != index_) rep.violations.push_back("key count outside the anchor's threshold range");
  return rep;
}

void ResizableTree::adopt(const std::vector<uint64_t>& slots) {
  index_ = index_for(slots.size());
  if (tree_.anchor() != threshold(index_)) tree_ = make_tree(index_);
  tree_.adopt(slots);
  shell_ = false;
  require(!tree_.has_free_slot(), "adopt: resizable table must be full");
}

OpReceipt diff_receipt(const std::vector<uint64_t>& before, const std::vector<uint64_t>& after) {
  OpReceipt r;
  std::unordered_map<uint64_t, uint64_t> new_pos;
  new_pos.reserve(after.size() * 2);
  for (uint64_t s = 0; s < after.size(); ++s)
    if (after[s] != kEmpty) new_pos.emplace(after[s], s);
  std::unordered_map<uint64_t, uint64_t> old_pos;
  old_pos.reserve(before.size() * 2);
  for (uint64_t s = 0; s < before.size(); ++s) {
    const uint64_t k = before[s];
    if (k == kEmpty) continue;
    old_pos.emplace(k, s);
    auto it = new_pos.find(k);
    if (it == new_pos.end()) r.record(k, s, kNoSlot);
    else if (it->second != s) r.record(k, s, it->second);
  }
  for (uint64_t s = 0; s < after.size(); ++s)
    if (after[s] != kEmpty && !old_pos.count(after[s])) r.record(after[s], kNoSlot, s);
  return r;
}

}  // namespace rainbow
