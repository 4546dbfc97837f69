#pragma once
/**
 * Measurement harness: one interface over every table kind, the random
 * delete/insert workload, probe-complexity levels and report emitters.
 *
 * Step counts (probes, moves, wall steps) are the primary metrics; nothing
 * here reads a clock, so a (seed, spec) pair fixes every report byte.
 */

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rainbow/rainbow_tree.hpp"
#include "rainbow/receipt.hpp"
#include "rainbow/snapshot.hpp"

namespace rainbow {

enum class TableKind { Cell, Tree, Resizable, Epsilon, Fixed, Linear, Uniform };

std::string to_string(TableKind k);
// Accepts the CLI names (rainbow, rainbow-fixed, linear, uniform) and the
// internal ones (cell, tree, resizable, epsilon, fixed).
TableKind parse_table_kind(const std::string& name);

struct TableSpec {
  TableKind kind = TableKind::Epsilon;
  uint64_t n = 1024;  // keys at build time
  double epsilon = 1.0 / 16;
  uint64_t seed = 1;
};

// Uniform view of a table for workloads and audits.
class Table {
 public:
  virtual ~Table() = default;
  virtual TableKind kind() const = 0;
  virtual OpReceipt build(const std::vector<uint64_t>& keys) = 0;
  virtual OpReceipt insert(uint64_t key) = 0;
  virtual OpReceipt erase(uint64_t key) = 0;
  virtual QueryResult query(uint64_t key, std::vector<uint64_t>* log = nullptr) const = 0;
  virtual std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit) const = 0;
  // Current array; tombstones read as empty.
  virtual std::vector<uint64_t> slots() const = 0;
  virtual uint64_t size() const = 0;
  virtual uint64_t slot_count() const = 0;
  virtual std::vector<std::string> check() const = 0;
  // Most empty slots the table may show between operations.
  virtual uint64_t empty_allowance() const = 0;
  // Binary state for the kinds that support snapshots.
  virtual std::optional<Snapshot> snapshot() const { return std::nullopt; }
  // Probe complexity of a stored key; throws KeyError when absent.
  uint64_t probe_complexity(uint64_t key) const;
};

std::unique_ptr<Table> make_table(const TableSpec& spec);

// Levels of probe complexity for a given epsilon: L = ceil(log log (1/eps) / 2),
// level 0 up to 2^(2^L), level i on (2^(2^(L+i-1)), 2^(2^(L+i))], level L beyond.
int level_count(double epsilon);
int probe_level(uint64_t probe_complexity, double epsilon);

struct WorkloadSpec {
  TableSpec table{};
  uint64_t pairs = 0;          // delete/insert pairs; 0 reports on the build only
  uint32_t windows = 8;        // time-series resolution
  uint64_t probe_sample = 2048;  // resident keys whose probe complexity is measured per window
  uint64_t audit_every = 1000;   // receipt audit spacing in operations
};

// Default number of pairs for a key count: 32n.
uint64_t default_pairs(uint64_t n);

struct WindowStats {
  uint64_t ops = 0;  // operations completed at the end of the window
  double mean_moves = 0;
  double mean_update_probes = 0;
  double mean_probe_complexity = 0;
  double load = 0;
  bool operator==(const WindowStats&) const = default;
};

struct MetricsReport {
  std::string table;
  uint64_t n = 0;
  uint64_t pairs = 0;
  uint64_t seed = 0;
  double epsilon = 0;
  uint64_t slots = 0;
  double load = 0;
  uint64_t updates = 0;
  double mean_moves = 0;
  double mean_update_probes = 0;
  double mean_wall_steps = 0;
  double mean_query_probes = 0;  // successful lookups of random resident keys
  double mean_miss_probes = 0;   // lookups of fresh keys
  double mean_probe_complexity = 0;
  uint64_t p50 = 0, p90 = 0, p99 = 0, max_probe = 0;
  uint64_t rebuilds = 0;
  uint64_t global_rebuilds = 0;
  uint64_t audit_checks = 0, audit_failures = 0;
  uint64_t oblivious_checks = 0, oblivious_failures = 0;
  int levels = -1;  // -1 when levels are not computed (load-1 tables and baselines)
  std::vector<uint64_t> level_histogram;
  std::vector<WindowStats> windows;
  bool operator==(const MetricsReport&) const = default;
};

// `on_finish` sees the table after the last operation.
MetricsReport run_hard_distribution(const WorkloadSpec& spec,
                                    const std::function<void(const Table&)>& on_finish = {});

// Number of keys whose slot differs between two arrays, counting keys new in
// `after`; keys that left are not counted.
uint64_t slot_edit_distance(const std::vector<uint64_t>& before, const std::vector<uint64_t>& after);

// Least-squares line y = a + b x.
struct LineFit {
  double a = 0, b = 0, r2 = 0;
  double residual = 0;       // sum of squared residuals
  double flat_residual = 0;  // sum of squared deviations from the mean
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

enum class ReportFormat { Csv, Json };
ReportFormat parse_format(const std::string& name);

std::string csv_header();
std::string csv_row(const MetricsReport& r);
std::string to_csv(const std::vector<MetricsReport>& reports);
std::string windows_csv(const MetricsReport& r);
std::string to_json(const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> reports_from_json(const std::string& text);
// Writes to `path`, or to stdout when path is empty or "-". Throws on I/O errors.
void emit_reports(const std::vector<MetricsReport>& reports, ReportFormat format, const std::string& path);

}  // namespace rainbow
