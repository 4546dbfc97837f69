#pragma once
/**
 * Desk-scale model of oblivious probe functions over a finite universe and
 * the transformation that makes them near-uniform.
 *
 * A probe function maps every key x in [0, U) to a sequence of slots in
 * [0, N). q(h, i, s) = n * Pr_x[s among the first i probes of x]. Occurrences
 * with q(h, i, s) > i^5 move from position i to position ceil(sqrt(q)), which
 * yields a generalized sequence (several slots may share a position). The
 * flattened sequence lists, position by position, the original occupant (or
 * Null) followed by the occurrences moved there.
 */

#include <cstdint>
#include <string>
#include <vector>

namespace rainbow {

enum class ProbeFamily {
  Permutation,    // distinct uniform slots per key
  Linear,         // consecutive from a uniform start
  DoubleHash,     // start + j * odd step
  SkewedFirst,    // heavy-tailed first probe, then uniform
  SlotZeroFirst,  // every key probes slot 0 first
  Identity,       // every key probes 0, 1, 2, ...
  HotSet,         // first probe in a hot set of 4 slots
};

std::string to_string(ProbeFamily f);
ProbeFamily parse_probe_family(const std::string& name);
bool adversarial(ProbeFamily f);

constexpr uint64_t kMaxUniverse = uint64_t{1} << 20;

struct ProbeFunction {
  static constexpr uint32_t kNull = ~uint32_t{0};
  uint64_t universe = 0;
  uint64_t slots = 0;
  uint64_t length = 0;
  std::vector<uint32_t> table;  // universe * length entries

  uint32_t at(uint64_t x, uint64_t j) const { return table[x * length + j]; }
};

// Throws ContractError when the universe exceeds kMaxUniverse.
ProbeFunction make_probe_function(ProbeFamily family, uint64_t universe, uint64_t slots, uint64_t length,
                                  uint64_t seed);

// Variable-length flattened sequences with the generalized position of every entry.
struct FlatSequences {
  std::vector<uint64_t> offset;  // universe + 1 entries
  std::vector<uint32_t> slot;    // ProbeFunction::kNull for padding
  std::vector<uint32_t> gpos;    // 1-based generalized position

  uint64_t size(uint64_t x) const { return offset[x + 1] - offset[x]; }
};

// cnt[i][s] for i in [1, imax]: keys whose first i entries contain s (Null skipped).
std::vector<std::vector<uint32_t>> prefix_counts(const FlatSequences& seqs, uint64_t slots, uint64_t imax);
FlatSequences as_sequences(const ProbeFunction& h);

struct UniformizeResult {
  FlatSequences flat;
  uint64_t bad_pairs = 0;  // (i, s) with q > i^5
  uint64_t moved = 0;      // occurrences moved
  uint64_t max_target = 0; // largest generalized position used
};

UniformizeResult uniformize(const ProbeFunction& h, uint64_t n, uint64_t imax);

struct Certification {
  uint64_t q_checks = 0, q_violations = 0;
  double max_q_ratio = 0;  // max q(h', i, s) / (64 i^10)
  uint64_t shift_checks = 0, shift_violations = 0;
  uint64_t assignments = 0;
  uint64_t flat_violations = 0;   // c(A, h') > 2 c(A, h~)
  uint64_t tilde_violations = 0;  // c(A, h~) > c(A, h) + 16 n
  uint64_t worst_tilde_excess = 0;
  bool ok() const { return q_violations == 0 && shift_violations == 0 && flat_violations == 0 && tilde_violations == 0; }
};

// Checks near-uniformity for i <= imax, the [g, 2g] position shift of every
// entry and the cost bounds on `assignments` sampled partial assignments
// (half random-greedy, half earliest-greedy, over n random keys).
Certification certify(const ProbeFunction& h, const UniformizeResult& u, uint64_t n, uint64_t imax,
                      uint64_t assignments, uint64_t seed);

}  // namespace rainbow
