#include "rainbow/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rainbow/errors.hpp"

namespace rainbow {

namespace {

constexpr char kMagic[8] = {'R', 'A', 'I', 'N', 'B', 'O', 'W', '\0'};

size_t header_size(SnapshotKind k) {
  switch (k) {
    case SnapshotKind::Tree:
    case SnapshotKind::Resizable:
      return 4;
    case SnapshotKind::Epsilon:
      return 8;
  }
  return 0;
}

void put(std::vector<uint8_t>& out, uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<uint8_t>& b) : b_(b) {}
  uint64_t get(int bytes) {
    if (pos_ + bytes > b_.size()) throw SnapshotError("snapshot truncated at byte " + std::to_string(pos_));
    uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= uint64_t{b_[pos_ + i]} << (8 * i);
    pos_ += bytes;
    return v;
  }
  size_t remaining() const { return b_.size() - pos_; }

 private:
  const std::vector<uint8_t>& b_;
  size_t pos_ = 0;
};

uint64_t mode_code(EpsilonMode m) {
  switch (m) {
    case EpsilonMode::Plain:
      return 0;
    case EpsilonMode::Normal:
      return 1;
    case EpsilonMode::Failure:
      return 2;
  }
  return 0;
}

void expect(const Snapshot& s, SnapshotKind k) {
  if (s.kind != k) throw SnapshotError("snapshot holds a " + to_string(s.kind) + " table, not " + to_string(k));
  if (s.header.size() != header_size(k)) throw SnapshotError("snapshot header has the wrong size");
}

}  // namespace

std::string to_string(SnapshotKind k) {
  switch (k) {
    case SnapshotKind::Tree:
      return "tree";
    case SnapshotKind::Resizable:
      return "resizable";
    case SnapshotKind::Epsilon:
      return "epsilon";
  }
  return "?";
}

std::vector<uint8_t> encode(const Snapshot& s) {
  require(s.header.size() == header_size(s.kind), "encode: header size does not match the kind");
  std::vector<uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(8 + 8 + 8 * (s.header.size() + 1 + s.slots.size()));
  put(out, kSnapshotVersion, 4);
  put(out, static_cast<uint32_t>(s.kind), 4);
  for (uint64_t v : s.header) put(out, v, 8);
  put(out, s.slots.size(), 8);
  for (uint64_t v : s.slots) put(out, v, 8);
  return out;
}

Snapshot decode(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw SnapshotError("not a snapshot: bad magic");
  Reader r(bytes);
  r.get(8);
  const uint64_t version = r.get(4);
  if (version != kSnapshotVersion) throw SnapshotError("unsupported snapshot version " + std::to_string(version));
  const uint64_t kind = r.get(4);
  if (kind < 1 || kind > 3) throw SnapshotError("unknown snapshot kind " + std::to_string(kind));
  Snapshot s;
  s.kind = static_cast<SnapshotKind>(kind);
  s.header.resize(header_size(s.kind));
  for (uint64_t& v : s.header) v = r.get(8);
  const uint64_t count = r.get(8);
  if (count != r.remaining() / 8 || r.remaining() % 8)
    throw SnapshotError("slot count " + std::to_string(count) + " disagrees with the payload length");
  s.slots.resize(count);
  for (uint64_t& v : s.slots) v = r.get(8);
  return s;
}

Snapshot capture(const RainbowTree& t) {
  return {SnapshotKind::Tree, {t.capacity(), t.seed(), t.geometry().hash(), t.anchor()}, t.slots()};
}

Snapshot capture(const ResizableTree& t) {
  return {SnapshotKind::Resizable,
          {t.anchor(), t.seed(), static_cast<uint64_t>(t.threshold_index()), t.base()},
          t.slots()};
}

Snapshot capture(const EpsilonTable& t) {
  const EpsilonOptions& o = t.options();
  return {SnapshotKind::Epsilon,
          {std::bit_cast<uint64_t>(o.epsilon), t.seed(), t.anchor(), t.schedule_base(), o.fixed_anchor, o.k_override,
           std::bit_cast<uint64_t>(o.spill_scale), mode_code(t.mode())},
          t.slots()};
}

RainbowTree restore_tree(const Snapshot& s) {
  expect(s, SnapshotKind::Tree);
  if (s.header[0] != s.slots.size()) throw SnapshotError("tree snapshot: capacity disagrees with the slot count");
  RainbowTree t(s.header[3], s.header[1]);
  if (t.geometry().hash() != s.header[2]) throw SnapshotError("tree snapshot: geometry fingerprint mismatch");
  try {
    t.adopt(s.slots);
  } catch (const ContractError& e) {
    throw SnapshotError(std::string("tree snapshot: ") + e.what());
  }
  return t;
}

ResizableTree restore_resizable(const Snapshot& s) {
  expect(s, SnapshotKind::Resizable);
  if (s.header[3] < 4) throw SnapshotError("resizable snapshot: schedule base below 4");
  ResizableTree t(s.header[3], s.header[1]);
  try {
    t.adopt(s.slots);
  } catch (const std::exception& e) {
    throw SnapshotError(std::string("resizable snapshot: ") + e.what());
  }
  if (t.anchor() != s.header[0] || static_cast<uint64_t>(t.threshold_index()) != s.header[2])
    throw SnapshotError("resizable snapshot: anchor disagrees with the schedule");
  return t;
}

EpsilonTable restore_epsilon(const Snapshot& s) {
  expect(s, SnapshotKind::Epsilon);
  EpsilonOptions o;
  o.epsilon = std::bit_cast<double>(s.header[0]);
  o.base = s.header[3];
  o.fixed_anchor = s.header[4];
  o.k_override = s.header[5];
  o.spill_scale = std::bit_cast<double>(s.header[6]);
  try {
    EpsilonTable t(o, s.header[1]);
    t.adopt(s.slots, s.header[2]);
    if (mode_code(t.mode()) != s.header[7]) throw SnapshotError("epsilon snapshot: mode flag disagrees with the array");
    return t;
  } catch (const SnapshotError&) {
    throw;
  } catch (const std::exception& e) {
    throw SnapshotError(std::string("epsilon snapshot: ") + e.what());
  }
}

std::vector<uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  f.close();
  if (!f) throw std::runtime_error("failed writing " + path);
}

SnapshotCheck validate_snapshot(const std::vector<uint8_t>& bytes) {
  const Snapshot s = decode(bytes);
  SnapshotCheck c;
  c.kind = s.kind;
  c.slots = s.slots.size();
  for (uint64_t k : s.slots) c.keys += k != kEmpty;
  auto finish = [&](const Snapshot& again, std::vector<std::string> violations) {
    c.violations = std::move(violations);
    c.round_trip = encode(again) == bytes;
  };
  switch (s.kind) {
    case SnapshotKind::Tree: {
      const RainbowTree t = restore_tree(s);
      finish(capture(t), t.check().violations);
      break;
    }
    case SnapshotKind::Resizable: {
      const ResizableTree t = restore_resizable(s);
      finish(capture(t), t.check().violations);
      break;
    }
    case SnapshotKind::Epsilon: {
      const EpsilonTable t = restore_epsilon(s);
      finish(capture(t), t.check().violations);
      break;
    }
  }
  return c;
}

}  // namespace rainbow
