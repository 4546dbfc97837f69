#pragma once
/**
 * Binary snapshots of table state.
 *
 * Layout, all integers little-endian:
 *   magic "RAINBOW\0" | version u32 | kind u32 | header fields u64 * H | count u64 | slots u64 * count
 *
 * Header fields by kind:
 *   tree       capacity, seed, geometry hash, anchor
 *   resizable  anchor, seed, threshold index, schedule base
 *   epsilon    epsilon (IEEE bits), seed, anchor, schedule base, fixed anchor,
 *              k override, spill scale (IEEE bits), mode
 *
 * The array alone carries the table; the header holds the parameters needed
 * to rebuild hash functions and layout. Tree options are the defaults.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "rainbow/epsilon_table.hpp"
#include "rainbow/rainbow_tree.hpp"
#include "rainbow/resizer.hpp"

namespace rainbow {

constexpr uint32_t kSnapshotVersion = 1;

enum class SnapshotKind : uint32_t { Tree = 1, Resizable = 2, Epsilon = 3 };
std::string to_string(SnapshotKind k);

struct Snapshot {
  SnapshotKind kind = SnapshotKind::Tree;
  std::vector<uint64_t> header;
  std::vector<uint64_t> slots;
  bool operator==(const Snapshot&) const = default;
};

std::vector<uint8_t> encode(const Snapshot& s);
// Throws SnapshotError on bad magic, version, kind, header size or length.
Snapshot decode(const std::vector<uint8_t>& bytes);

Snapshot capture(const RainbowTree& t);
Snapshot capture(const ResizableTree& t);
Snapshot capture(const EpsilonTable& t);

RainbowTree restore_tree(const Snapshot& s);
ResizableTree restore_resizable(const Snapshot& s);
EpsilonTable restore_epsilon(const Snapshot& s);

std::vector<uint8_t> read_bytes(const std::string& path);
void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

struct SnapshotCheck {
  SnapshotKind kind = SnapshotKind::Tree;
  uint64_t slots = 0;
  uint64_t keys = 0;
  bool round_trip = false;  // restore then capture reproduces the bytes
  std::vector<std::string> violations;
  bool ok() const { return round_trip && violations.empty(); }
};

// Decodes, restores, runs the table's validator and re-encodes.
SnapshotCheck validate_snapshot(const std::vector<uint8_t>& bytes);

}  // namespace rainbow
