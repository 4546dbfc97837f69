#include "rainbow/workbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "rainbow/baselines.hpp"
#include "rainbow/epsilon_table.hpp"
#include "rainbow/errors.hpp"
#include "rainbow/rainbow_cell.hpp"
#include "rainbow/resizer.hpp"

namespace rainbow {

std::string to_string(TableKind k) {
  switch (k) {
    case TableKind::Cell:
      return "cell";
    case TableKind::Tree:
      return "tree";
    case TableKind::Resizable:
      return "resizable";
    case TableKind::Epsilon:
      return "rainbow";
    case TableKind::Fixed:
      return "rainbow-fixed";
    case TableKind::Linear:
      return "linear";
    case TableKind::Uniform:
      return "uniform";
  }
  return "?";
}

TableKind parse_table_kind(const std::string& name) {
  if (name == "cell") return TableKind::Cell;
  if (name == "tree") return TableKind::Tree;
  if (name == "resizable") return TableKind::Resizable;
  if (name == "rainbow" || name == "epsilon") return TableKind::Epsilon;
  if (name == "rainbow-fixed" || name == "fixed") return TableKind::Fixed;
  if (name == "linear") return TableKind::Linear;
  if (name == "uniform") return TableKind::Uniform;
  throw ContractError("unknown table kind: " + name);
}

uint64_t Table::probe_complexity(uint64_t key) const {
  const QueryResult q = query(key);
  if (!q.found) throw KeyError("probe_complexity: key not present");
  return q.probes;
}

namespace {

std::vector<uint64_t> truncate(std::vector<uint64_t> v, uint64_t limit) {
  if (v.size() > limit) v.resize(limit);
  return v;
}

uint64_t capacity_for(uint64_t n, double epsilon) {
  return static_cast<uint64_t>(std::ceil(static_cast<double>(n) / (1.0 - epsilon)));
}

class CellTable final : public Table {
 public:
  CellTable(uint64_t n, uint64_t seed)
      : arr_(std::make_unique<std::vector<uint64_t>>(n, kEmpty)), cell_(arr_.get(), 0, CellParams::make(n), seed) {}
  TableKind kind() const override { return TableKind::Cell; }
  OpReceipt build(const std::vector<uint64_t>& keys) override {
    OpReceipt r;
    cell_.init(keys, r);
    return r;
  }
  OpReceipt insert(uint64_t key) override {
    require(key != kEmpty, "insert: key 0 is reserved");
    OpReceipt r;
    const CellScan s = cell_.query(key, r.probes, nullptr);
    if (s.found) throw KeyError("insert: key already present");
    if (cell_.holes() == 0) throw CapacityError("insert: cell is full");
    cell_.place(key, r);
    return r;
  }
  OpReceipt erase(uint64_t key) override {
    OpReceipt r;
    const CellScan s = cell_.query(key, r.probes, nullptr);
    if (!s.found) throw KeyError("erase: key not present");
    cell_.remove_at(s.local, r);
    return r;
  }
  QueryResult query(uint64_t key, std::vector<uint64_t>* log) const override {
    QueryResult q;
    if (key == kEmpty) return q;
    const CellScan s = cell_.query(key, q.probes, log);
    q.found = s.found;
    q.slot = s.found ? s.local : kNoSlot;
    return q;
  }
  std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit) const override {
    return truncate(cell_.probe_sequence(key), limit);
  }
  std::vector<uint64_t> slots() const override { return *arr_; }
  uint64_t size() const override { return cell_.count(); }
  uint64_t slot_count() const override { return arr_->size(); }
  std::vector<std::string> check() const override { return cell_.check().violations; }
  uint64_t empty_allowance() const override { return 1; }

 private:
  std::unique_ptr<std::vector<uint64_t>> arr_;
  RainbowCell cell_;
};

class TreeTable final : public Table {
 public:
  TreeTable(uint64_t n, uint64_t seed) : t_(n, seed) {}
  TableKind kind() const override { return TableKind::Tree; }
  OpReceipt build(const std::vector<uint64_t>& keys) override { return t_.build(keys); }
  OpReceipt insert(uint64_t key) override {
    if (t_.contains(key)) throw KeyError("insert: key already present");
    if (!t_.has_free_slot()) throw CapacityError("insert: table is full");
    return t_.insert(key);
  }
  OpReceipt erase(uint64_t key) override { return t_.erase(key); }
  QueryResult query(uint64_t key, std::vector<uint64_t>* log) const override { return t_.query(key, log); }
  std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit) const override {
    return t_.probe_sequence(key, limit);
  }
  std::vector<uint64_t> slots() const override { return t_.slots(); }
  uint64_t size() const override { return t_.size(); }
  uint64_t slot_count() const override { return t_.capacity(); }
  std::vector<std::string> check() const override { return t_.check().violations; }
  uint64_t empty_allowance() const override { return 1; }
  std::optional<Snapshot> snapshot() const override { return capture(t_); }

 private:
  RainbowTree t_;
};

class ResizableTable final : public Table {
 public:
  ResizableTable(uint64_t n, uint64_t seed) : t_(std::max<uint64_t>(4, n / 2), seed) {}
  TableKind kind() const override { return TableKind::Resizable; }
  OpReceipt build(const std::vector<uint64_t>& keys) override { return t_.build(keys); }
  OpReceipt insert(uint64_t key) override { return t_.grow_insert(key); }
  OpReceipt erase(uint64_t key) override { return t_.shrink_delete(key); }
  QueryResult query(uint64_t key, std::vector<uint64_t>* log) const override { return t_.query(key, log); }
  std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit) const override {
    return t_.probe_sequence(key, limit);
  }
  std::vector<uint64_t> slots() const override { return t_.slots(); }
  uint64_t size() const override { return t_.size(); }
  uint64_t slot_count() const override { return t_.capacity(); }
  std::vector<std::string> check() const override { return t_.check().violations; }
  uint64_t empty_allowance() const override { return 0; }
  std::optional<Snapshot> snapshot() const override { return capture(t_); }

 private:
  ResizableTree t_;
};

class EpsilonAdapter final : public Table {
 public:
  EpsilonAdapter(double epsilon, uint64_t seed) : t_(make_options(epsilon), seed) {}
  TableKind kind() const override { return TableKind::Epsilon; }
  OpReceipt build(const std::vector<uint64_t>& keys) override { return t_.build(keys); }
  OpReceipt insert(uint64_t key) override { return t_.insert(key); }
  OpReceipt erase(uint64_t key) override { return t_.erase(key); }
  QueryResult query(uint64_t key, std::vector<uint64_t>* log) const override { return t_.query(key, log); }
  std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit) const override {
    return t_.probe_sequence(key, limit);
  }
  std::vector<uint64_t> slots() const override { return t_.slots(); }
  uint64_t size() const override { return t_.size(); }
  uint64_t slot_count() const override { return t_.slot_count(); }
  std::vector<std::string> check() const override { return t_.check().violations; }
  uint64_t empty_allowance() const override {
    if (t_.mode() == EpsilonMode::Plain) return 0;
    return static_cast<uint64_t>(3.0 * t_.epsilon() * static_cast<double>(t_.anchor())) + t_.subtables() + 2;
  }
  std::optional<Snapshot> snapshot() const override { return capture(t_); }

 private:
  static EpsilonOptions make_options(double epsilon) {
    EpsilonOptions o;
    o.epsilon = epsilon;
    return o;
  }
  EpsilonTable t_;
};

class FixedAdapter final : public Table {
 public:
  FixedAdapter(uint64_t n, double epsilon, uint64_t seed) : t_(capacity_for(n, epsilon), epsilon, seed) {}
  TableKind kind() const override { return TableKind::Fixed; }
  OpReceipt build(const std::vector<uint64_t>& keys) override { return t_.build(keys); }
  OpReceipt insert(uint64_t key) override { return t_.insert(key); }
  OpReceipt erase(uint64_t key) override { return t_.erase(key); }
  QueryResult query(uint64_t key, std::vector<uint64_t>* log) const override { return t_.query(key, log); }
  std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit) const override {
    return t_.probe_sequence(key, limit);
  }
  std::vector<uint64_t> slots() const override {
    std::vector<uint64_t> s = t_.slots();
    for (uint64_t& k : s)
      if (k == kTombstone) k = kEmpty;
    return s;
  }
  uint64_t size() const override { return t_.size(); }
  uint64_t slot_count() const override { return t_.capacity(); }
  std::vector<std::string> check() const override { return t_.check(); }
  uint64_t empty_allowance() const override { return t_.capacity(); }

 private:
  FixedCapacityTable t_;
};

class ProbingAdapter final : public Table {
 public:
  ProbingAdapter(ProbeKind kind, uint64_t n, double epsilon, uint64_t seed)
      : kind_(kind), t_(kind, capacity_for(n, epsilon), seed, epsilon) {}
  TableKind kind() const override { return kind_ == ProbeKind::Linear ? TableKind::Linear : TableKind::Uniform; }
  OpReceipt build(const std::vector<uint64_t>& keys) override { return t_.build(keys); }
  OpReceipt insert(uint64_t key) override { return t_.insert(key); }
  OpReceipt erase(uint64_t key) override { return t_.erase(key); }
  QueryResult query(uint64_t key, std::vector<uint64_t>* log) const override { return t_.query(key, log); }
  std::vector<uint64_t> probe_sequence(uint64_t key, uint64_t limit) const override {
    return t_.probe_sequence(key, limit);
  }
  std::vector<uint64_t> slots() const override {
    std::vector<uint64_t> s = t_.slots();
    for (uint64_t& k : s)
      if (k == kTombstone) k = kEmpty;
    return s;
  }
  uint64_t size() const override { return t_.size(); }
  uint64_t slot_count() const override { return t_.capacity(); }
  std::vector<std::string> check() const override { return t_.check().violations; }
  uint64_t empty_allowance() const override { return t_.capacity(); }

 private:
  ProbeKind kind_;
  ProbingTable t_;
};

}  // namespace

std::unique_ptr<Table> make_table(const TableSpec& spec) {
  require(spec.n >= 4, "make_table: n must be at least 4");
  switch (spec.kind) {
    case TableKind::Cell:
      return std::make_unique<CellTable>(spec.n, spec.seed);
    case TableKind::Tree:
      return std::make_unique<TreeTable>(spec.n, spec.seed);
    case TableKind::Resizable:
      return std::make_unique<ResizableTable>(spec.n, spec.seed);
    case TableKind::Epsilon:
      return std::make_unique<EpsilonAdapter>(spec.epsilon, spec.seed);
    case TableKind::Fixed:
      return std::make_unique<FixedAdapter>(spec.n, spec.epsilon, spec.seed);
    case TableKind::Linear:
      return std::make_unique<ProbingAdapter>(ProbeKind::Linear, spec.n, spec.epsilon, spec.seed);
    case TableKind::Uniform:
      return std::make_unique<ProbingAdapter>(ProbeKind::Uniform, spec.n, spec.epsilon, spec.seed);
  }
  throw ContractError("make_table: unknown kind");
}

// ------------------------------------------------------------------- levels

int level_count(double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0, "level_count: epsilon must lie in (0, 1)");
  const double ll = std::log2(std::log2(1.0 / epsilon));
  return ll <= 0 ? 0 : static_cast<int>(std::ceil(ll / 2.0 - 1e-12));
}

namespace {

// k <= 2^(2^e)
bool within_tower(uint64_t k, int e) {
  if (e >= 6) return true;
  const int bits = 1 << e;
  return bits >= 64 || k <= (uint64_t{1} << bits);
}

}  // namespace

int probe_level(uint64_t k, double epsilon) {
  require(k >= 1, "probe_level: probe complexity starts at 1");
  const int L = level_count(epsilon);
  if (within_tower(k, L)) return 0;
  if (!within_tower(k, 2 * L)) return L;
  for (int i = 1; i <= L; ++i)
    if (within_tower(k, L + i)) return i;
  return L;
}

// ----------------------------------------------------------------- workload

uint64_t default_pairs(uint64_t n) { return 32 * n; }

uint64_t slot_edit_distance(const std::vector<uint64_t>& before, const std::vector<uint64_t>& after) {
  std::unordered_map<uint64_t, uint64_t> old_pos;
  old_pos.reserve(before.size() * 2);
  for (uint64_t s = 0; s < before.size(); ++s)
    if (before[s] != kEmpty) old_pos.emplace(before[s], s);
  uint64_t d = 0;
  for (uint64_t s = 0; s < after.size(); ++s) {
    if (after[s] == kEmpty) continue;
    auto it = old_pos.find(after[s]);
    if (it == old_pos.end() || it->second != s) ++d;
  }
  return d;
}

namespace {

uint64_t percentile(const std::vector<uint64_t>& sorted, double p) {
  if (sorted.empty()) return 0;
  const auto idx = static_cast<size_t>(std::ceil(p * static_cast<double>(sorted.size()))) - 1;
  return sorted[std::min(idx, sorted.size() - 1)];
}

class KeySource {
 public:
  explicit KeySource(uint64_t seed) : rng_(derive_master(seed, static_cast<uint64_t>(Domain::Workload))) {}
  uint64_t fresh(const std::unordered_set<uint64_t>& live) {
    while (true) {
      const uint64_t k = rng_.next();
      if (k != kEmpty && k != kTombstone && !live.count(k) && used_.insert(k).second) return k;
    }
  }
  uint64_t below(uint64_t m) { return rng_.below(m); }

 private:
  Rng rng_;
  std::unordered_set<uint64_t> used_;
};

bool levels_apply(TableKind k) { return k == TableKind::Epsilon || k == TableKind::Fixed; }

}  // namespace

MetricsReport run_hard_distribution(const WorkloadSpec& spec, const std::function<void(const Table&)>& on_finish) {
  const TableSpec& ts = spec.table;
  MetricsReport rep;
  rep.table = to_string(ts.kind);
  rep.n = ts.n;
  rep.pairs = spec.pairs;
  rep.seed = ts.seed;
  rep.epsilon = ts.epsilon;

  auto table = make_table(ts);
  KeySource src(ts.seed);
  std::unordered_set<uint64_t> live_set;
  std::vector<uint64_t> live;
  live.reserve(ts.n);
  for (uint64_t i = 0; i < ts.n; ++i) {
    const uint64_t k = src.fresh(live_set);
    live_set.insert(k);
    live.push_back(k);
  }
  const OpReceipt built = table->build(live);
  for (const RebuildEvent& e : built.rebuilds) rep.global_rebuilds += e.level == 0;

  Rng sampler(derive_master(ts.seed, static_cast<uint64_t>(Domain::Sampler)));
  std::vector<uint64_t> final_sample;
  // Probe complexity over a sample of residents (all of them when few).
  auto measure = [&](std::vector<uint64_t>* keep) {
    std::vector<uint64_t> pcs;
    const uint64_t m = std::min<uint64_t>(spec.probe_sample, live.size());
    pcs.reserve(m);
    for (uint64_t j = 0; j < m; ++j) {
      const uint64_t key = m == live.size() ? live[j] : live[sampler.below(live.size())];
      std::vector<uint64_t> log;
      const QueryResult q = table->query(key, &log);
      if (!q.found) throw InvariantError("workload: resident key not found");
      ++rep.oblivious_checks;
      if (table->probe_sequence(key, log.size()) != log) ++rep.oblivious_failures;
      pcs.push_back(q.probes);
    }
    if (keep) *keep = pcs;
    if (pcs.empty()) return 0.0;
    return static_cast<double>(std::accumulate(pcs.begin(), pcs.end(), uint64_t{0})) /
           static_cast<double>(pcs.size());
  };

  const uint64_t ops = 2 * spec.pairs;
  const uint32_t windows = spec.pairs ? std::max<uint32_t>(1, spec.windows) : 0;
  uint64_t tot_moves = 0, tot_probes = 0, tot_wall = 0, tot_q = 0, tot_miss = 0;
  uint64_t win_moves = 0, win_probes = 0, win_ops = 0;
  uint64_t next_window = 1;
  for (uint64_t op = 0; op < ops; ++op) {
    const bool audit = spec.audit_every && op % spec.audit_every == 0;
    std::vector<uint64_t> pre;
    if (audit) pre = table->slots();
    OpReceipt r;
    if (op % 2 == 0) {
      const size_t i = src.below(live.size());
      const uint64_t k = live[i];
      r = table->erase(k);
      live_set.erase(k);
      live[i] = live.back();
      live.pop_back();
    } else {
      const uint64_t k = src.fresh(live_set);
      r = table->insert(k);
      live_set.insert(k);
      live.push_back(k);
    }
    const uint64_t moves = r.moves();
    if (audit) {
      ++rep.audit_checks;
      if (slot_edit_distance(pre, table->slots()) != moves) ++rep.audit_failures;
    }
    tot_moves += moves;
    tot_probes += r.probes;
    tot_wall += r.wall_steps;
    win_moves += moves;
    win_probes += r.probes;
    ++win_ops;
    rep.rebuilds += r.rebuilds.size();
    for (const RebuildEvent& e : r.rebuilds) rep.global_rebuilds += e.level == 0;
    if (op % 2 == 1) {
      tot_q += table->query(live[sampler.below(live.size())]).probes;
      tot_miss += table->query(src.fresh(live_set)).probes;
    }
    if (windows && op + 1 == next_window * ops / windows) {
      WindowStats w;
      w.ops = op + 1;
      w.mean_moves = static_cast<double>(win_moves) / static_cast<double>(win_ops);
      w.mean_update_probes = static_cast<double>(win_probes) / static_cast<double>(win_ops);
      w.mean_probe_complexity = measure(next_window == windows ? &final_sample : nullptr);
      w.load = static_cast<double>(table->size()) / static_cast<double>(table->slot_count());
      rep.windows.push_back(w);
      win_moves = win_probes = win_ops = 0;
      ++next_window;
    }
  }
  if (!windows) rep.mean_probe_complexity = measure(&final_sample);
  else rep.mean_probe_complexity = rep.windows.back().mean_probe_complexity;

  rep.updates = ops;
  rep.slots = table->slot_count();
  rep.load = static_cast<double>(table->size()) / static_cast<double>(rep.slots);
  if (ops) {
    rep.mean_moves = static_cast<double>(tot_moves) / static_cast<double>(ops);
    rep.mean_update_probes = static_cast<double>(tot_probes) / static_cast<double>(ops);
    rep.mean_wall_steps = static_cast<double>(tot_wall) / static_cast<double>(ops);
    rep.mean_query_probes = static_cast<double>(tot_q) / static_cast<double>(spec.pairs);
    rep.mean_miss_probes = static_cast<double>(tot_miss) / static_cast<double>(spec.pairs);
  }
  std::sort(final_sample.begin(), final_sample.end());
  rep.p50 = percentile(final_sample, 0.5);
  rep.p90 = percentile(final_sample, 0.9);
  rep.p99 = percentile(final_sample, 0.99);
  rep.max_probe = final_sample.empty() ? 0 : final_sample.back();
  if (levels_apply(ts.kind)) {
    rep.levels = level_count(ts.epsilon);
    rep.level_histogram.assign(rep.levels + 1, 0);
    for (uint64_t pc : final_sample) ++rep.level_histogram[probe_level(pc, ts.epsilon)];
  }
  if (on_finish) on_finish(*table);
  return rep;
}

// ------------------------------------------------------------------ fitting

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.b = sxx > 0 ? sxy / sxx : 0.0;
  f.a = my - f.b * mx;
  for (size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.a + f.b * x[i]);
    f.residual += e * e;
  }
  f.flat_residual = syy;
  f.r2 = syy > 0 ? 1.0 - f.residual / syy : 1.0;
  return f;
}

// ------------------------------------------------------------------ reports

ReportFormat parse_format(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  throw ContractError("unknown report format: " + name);
}

namespace {

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string join_counts(const std::vector<uint64_t>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += '|';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

std::string csv_header() {
  return "table,n,pairs,seed,epsilon,slots,load,updates,mean_moves,mean_update_probes,mean_wall_steps,"
         "mean_query_probes,mean_miss_probes,mean_probe_complexity,p50,p90,p99,max_probe,rebuilds,"
         "global_rebuilds,audit_checks,audit_failures,oblivious_checks,oblivious_failures,levels,level_histogram\n";
}

std::string csv_row(const MetricsReport& r) {
  std::ostringstream o;
  o << r.table << ',' << r.n << ',' << r.pairs << ',' << r.seed << ',' << fixed(r.epsilon) << ',' << r.slots << ','
    << fixed(r.load) << ',' << r.updates << ',' << fixed(r.mean_moves) << ',' << fixed(r.mean_update_probes) << ','
    << fixed(r.mean_wall_steps) << ',' << fixed(r.mean_query_probes) << ',' << fixed(r.mean_miss_probes) << ','
    << fixed(r.mean_probe_complexity) << ',' << r.p50 << ',' << r.p90 << ',' << r.p99 << ',' << r.max_probe << ','
    << r.rebuilds << ',' << r.global_rebuilds << ',' << r.audit_checks << ',' << r.audit_failures << ','
    << r.oblivious_checks << ',' << r.oblivious_failures << ',' << r.levels << ',' << join_counts(r.level_histogram)
    << '\n';
  return o.str();
}

std::string to_csv(const std::vector<MetricsReport>& reports) {
  std::string out = csv_header();
  for (const auto& r : reports) out += csv_row(r);
  return out;
}

std::string windows_csv(const MetricsReport& r) {
  std::string out = "table,n,epsilon,ops,mean_moves,mean_update_probes,mean_probe_complexity,load\n";
  for (const auto& w : r.windows)
    out += r.table + ',' + std::to_string(r.n) + ',' + fixed(r.epsilon) + ',' + std::to_string(w.ops) + ',' +
           fixed(w.mean_moves) + ',' + fixed(w.mean_update_probes) + ',' + fixed(w.mean_probe_complexity) + ',' +
           fixed(w.load) + '\n';
  return out;
}

namespace {

nlohmann::ordered_json report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["table"] = r.table;
  j["n"] = r.n;
  j["pairs"] = r.pairs;
  j["seed"] = r.seed;
  j["epsilon"] = r.epsilon;
  j["slots"] = r.slots;
  j["load"] = r.load;
  j["updates"] = r.updates;
  j["mean_moves"] = r.mean_moves;
  j["mean_update_probes"] = r.mean_update_probes;
  j["mean_wall_steps"] = r.mean_wall_steps;
  j["mean_query_probes"] = r.mean_query_probes;
  j["mean_miss_probes"] = r.mean_miss_probes;
  j["mean_probe_complexity"] = r.mean_probe_complexity;
  j["p50"] = r.p50;
  j["p90"] = r.p90;
  j["p99"] = r.p99;
  j["max_probe"] = r.max_probe;
  j["rebuilds"] = r.rebuilds;
  j["global_rebuilds"] = r.global_rebuilds;
  j["audit_checks"] = r.audit_checks;
  j["audit_failures"] = r.audit_failures;
  j["oblivious_checks"] = r.oblivious_checks;
  j["oblivious_failures"] = r.oblivious_failures;
  j["levels"] = r.levels;
  j["level_histogram"] = r.level_histogram;
  auto& w = j["windows"] = nlohmann::ordered_json::array();
  for (const auto& s : r.windows)
    w.push_back({{"ops", s.ops},
                 {"mean_moves", s.mean_moves},
                 {"mean_update_probes", s.mean_update_probes},
                 {"mean_probe_complexity", s.mean_probe_complexity},
                 {"load", s.load}});
  return j;
}

}  // namespace

std::string to_json(const std::vector<MetricsReport>& reports) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : reports) j.push_back(report_json(r));
  return j.dump(2) + "\n";
}

std::vector<MetricsReport> reports_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  std::vector<MetricsReport> out;
  for (const auto& e : j) {
    MetricsReport r;
    r.table = e.at("table").get<std::string>();
    r.n = e.at("n");
    r.pairs = e.at("pairs");
    r.seed = e.at("seed");
    r.epsilon = e.at("epsilon");
    r.slots = e.at("slots");
    r.load = e.at("load");
    r.updates = e.at("updates");
    r.mean_moves = e.at("mean_moves");
    r.mean_update_probes = e.at("mean_update_probes");
    r.mean_wall_steps = e.at("mean_wall_steps");
    r.mean_query_probes = e.at("mean_query_probes");
    r.mean_miss_probes = e.at("mean_miss_probes");
    r.mean_probe_complexity = e.at("mean_probe_complexity");
    r.p50 = e.at("p50");
    r.p90 = e.at("p90");
    r.p99 = e.at("p99");
    r.max_probe = e.at("max_probe");
    r.rebuilds = e.at("rebuilds");
    r.global_rebuilds = e.at("global_rebuilds");
    r.audit_checks = e.at("audit_checks");
    r.audit_failures = e.at("audit_failures");
    r.oblivious_checks = e.at("oblivious_checks");
    r.oblivious_failures = e.at("oblivious_failures");
    r.levels = e.at("levels");
    r.level_histogram = e.at("level_histogram").get<std::vector<uint64_t>>();
    for (const auto& w : e.at("windows"))
      r.windows.push_back({w.at("ops"), w.at("mean_moves"), w.at("mean_update_probes"),
                           w.at("mean_probe_complexity"), w.at("load")});
    out.push_back(std::move(r));
  }
  return out;
}

void emit_reports(const std::vector<MetricsReport>& reports, ReportFormat format, const std::string& path) {
  const std::string text = format == ReportFormat::Csv ? to_csv(reports) : to_json(reports);
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw std::runtime_error("failed writing report to stdout");
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
  f.close();
  if (!f) throw std::runtime_error("failed writing " + path);
}

}  // namespace rainbow
