// Command-line front end for the workbench: geometry dumps, workload runs,
// probe-function certification and snapshot validation.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "rainbow/errors.hpp"
#include "rainbow/geometry.hpp"
#include "rainbow/snapshot.hpp"
#include "rainbow/uniformize.hpp"
#include "rainbow/workbench.hpp"

using namespace rainbow;

namespace {

struct Common {
  uint64_t n = 1024;
  std::vector<double> epsilon{1.0 / 16};
  uint64_t ops = 0;
  std::optional<uint64_t> seed;
  std::string table = "rainbow";
  std::string format = "csv";
  std::string out;
  std::string snapshot;
  std::string windows_out;
  uint32_t windows = 8;
};

uint64_t resolve_seed(const Common& c) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("RAINBOW_SEED")) {
    try {
      size_t used = 0;
      const uint64_t v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ContractError(std::string("RAINBOW_SEED is not an unsigned integer: ") + env);
  }
  return 1;
}

void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
  if (!f.flush()) throw std::runtime_error("failed writing " + path);
}

void add_common(CLI::App* app, Common& c, bool eps_list) {
  app->add_option("--n", c.n, "Keys at build time")->check(CLI::Range(uint64_t{4}, uint64_t{1} << 26));
  if (eps_list)
    app->add_option("--epsilon", c.epsilon, "Slack parameter; repeat for a sweep")->expected(1, -1)
        ->check(CLI::Range(1e-9, 0.49));
  else
    app->add_option("--epsilon", c.epsilon, "Slack parameter")->expected(1)->check(CLI::Range(1e-9, 0.49));
  app->add_option("--ops", c.ops, "Delete/insert pairs (default 32n)");
  app->add_option("--seed", c.seed, "Master seed (falls back to RAINBOW_SEED, then 1)");
  app->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--out", c.out, "Report path (stdout when omitted)");
}

void add_run_extras(CLI::App* app, Common& c) {
  app->add_option("--windows", c.windows, "Time-series windows")->check(CLI::Range(1u, 10000u));
  app->add_option("--windows-out", c.windows_out, "Write the per-window time series as CSV");
}

int run_bench(const Common& c, TableKind kind) {
  std::vector<MetricsReport> reports;
  std::string series;
  for (double eps : c.epsilon) {
    WorkloadSpec w;
    w.table = {kind, c.n, eps, resolve_seed(c)};
    w.pairs = c.ops ? c.ops : default_pairs(c.n);
    w.windows = c.windows;
    std::function<void(const Table&)> dump;
    if (!c.snapshot.empty())
      dump = [&](const Table& t) {
        const auto s = t.snapshot();
        if (!s) throw ContractError("table kind " + to_string(kind) + " has no snapshot format");
        write_bytes(c.snapshot, encode(*s));
      };
    reports.push_back(run_hard_distribution(w, dump));
    const std::string csv = windows_csv(reports.back());
    series += series.empty() ? csv : csv.substr(csv.find('\n') + 1);
  }
  emit_reports(reports, parse_format(c.format), c.out);
  if (!c.windows_out.empty()) write_text(series, c.windows_out);
  for (const auto& r : reports)
    if (r.audit_failures || r.oblivious_failures) {
      std::cerr << "audit failures in " << r.table << " run\n";
      return 1;
    }
  return 0;
}

int run_geometry(const Common& c) {
  const TreeGeometry g = derive_geometry(c.n);
  const ColorDistribution colors = solve_color_distribution(g, c.n);
  const TreeGeometry grown = g.with_m1(g.m1() + (c.n + 9) / 10);
  nlohmann::ordered_json j;
  j["capacity"] = g.capacity();
  j["levels"] = g.levels();
  j["upper_slots"] = g.upper_slots();
  j["leaves"] = g.m1();
  j["fingerprint"] = g.hash();
  j["windows_ok_at_n"] = eq1_window_violation(g, colors) == 0;
  j["windows_ok_at_1_1n"] = eq1_window_violation(grown, colors) == 0;
  std::ostringstream csv;
  csv << "level,n,buffer,fanout,subproblems,remainder,offset,p\n";
  auto& levels = j["per_level"] = nlohmann::ordered_json::array();
  for (int i = g.levels(); i >= 1; --i) {
    const double p = i >= 2 ? colors.probability(i) : 0.0;
    const uint64_t n = i >= 2 ? g.n(i) : 1, b = i >= 2 ? g.b(i) : 1, f = i >= 2 ? g.f(i) : 0;
    const uint64_t rem = i >= 2 ? g.remainder(i) : 0;
    levels.push_back({{"level", i},
                      {"n", n},
                      {"buffer", b},
                      {"fanout", f},
                      {"subproblems", g.m(i)},
                      {"remainder", rem},
                      {"offset", g.offset(i)},
                      {"p", p}});
    char pbuf[32];
    std::snprintf(pbuf, sizeof pbuf, "%.9f", p);
    csv << i << ',' << n << ',' << b << ',' << f << ',' << g.m(i) << ',' << rem << ',' << g.offset(i) << ','
        << pbuf << '\n';
  }
  write_text(c.format == "json" ? j.dump(2) + "\n" : csv.str(), c.out);
  return 0;
}

struct UniformizeArgs {
  uint64_t universe = 1 << 16;
  uint64_t slots = 1024;
  uint64_t length = 64;
  uint64_t imax = 32;
  uint64_t assignments = 100;
  std::vector<std::string> families;
};

int run_uniformize(const Common& c, const UniformizeArgs& a) {
  std::vector<std::pair<ProbeFamily, uint64_t>> jobs;
  const uint64_t seed = resolve_seed(c);
  if (a.families.empty()) {
    // Ten random functions over four families, then the three adversarial ones.
    const ProbeFamily random[] = {ProbeFamily::Permutation, ProbeFamily::Linear, ProbeFamily::DoubleHash,
                                  ProbeFamily::SkewedFirst};
    for (uint64_t i = 0; i < 10; ++i) jobs.emplace_back(random[i % 4], derive_master(seed, i));
    for (auto f : {ProbeFamily::SlotZeroFirst, ProbeFamily::Identity, ProbeFamily::HotSet})
      jobs.emplace_back(f, derive_master(seed, 100 + static_cast<uint64_t>(f)));
  } else {
    for (const auto& name : a.families) jobs.emplace_back(parse_probe_family(name), seed);
  }
  const uint64_t n = c.n;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  std::ostringstream csv;
  csv << "family,seed,universe,slots,length,n,bad_pairs,moved,max_target,max_q_ratio,q_violations,"
         "shift_violations,assignments,flat_violations,tilde_violations,worst_tilde_excess,ok\n";
  bool all_ok = true;
  for (const auto& [fam, s] : jobs) {
    const ProbeFunction h = make_probe_function(fam, a.universe, a.slots, a.length, s);
    const UniformizeResult u = uniformize(h, n, a.imax);
    const Certification cert = certify(h, u, n, a.imax, a.assignments, s);
    all_ok = all_ok && cert.ok();
    char ratio[32];
    std::snprintf(ratio, sizeof ratio, "%.6e", cert.max_q_ratio);
    csv << to_string(fam) << ',' << s << ',' << a.universe << ',' << a.slots << ',' << a.length << ',' << n << ','
        << u.bad_pairs << ',' << u.moved << ',' << u.max_target << ',' << ratio << ',' << cert.q_violations << ','
        << cert.shift_violations << ',' << cert.assignments << ',' << cert.flat_violations << ','
        << cert.tilde_violations << ',' << cert.worst_tilde_excess << ',' << (cert.ok() ? 1 : 0) << '\n';
    rows.push_back({{"family", to_string(fam)},
                    {"seed", s},
                    {"universe", a.universe},
                    {"slots", a.slots},
                    {"length", a.length},
                    {"n", n},
                    {"bad_pairs", u.bad_pairs},
                    {"moved", u.moved},
                    {"max_target", u.max_target},
                    {"max_q_ratio", cert.max_q_ratio},
                    {"q_violations", cert.q_violations},
                    {"shift_violations", cert.shift_violations},
                    {"assignments", cert.assignments},
                    {"flat_violations", cert.flat_violations},
                    {"tilde_violations", cert.tilde_violations},
                    {"worst_tilde_excess", cert.worst_tilde_excess},
                    {"ok", cert.ok()}});
  }
  write_text(c.format == "json" ? rows.dump(2) + "\n" : csv.str(), c.out);
  return all_ok ? 0 : 1;
}

int run_validate(const std::string& path, const Common& c) {
  const SnapshotCheck chk = validate_snapshot(read_bytes(path));
  nlohmann::ordered_json j;
  j["path"] = path;
  j["kind"] = to_string(chk.kind);
  j["slots"] = chk.slots;
  j["keys"] = chk.keys;
  j["round_trip"] = chk.round_trip;
  j["violations"] = chk.violations;
  j["ok"] = chk.ok();
  std::ostringstream csv;
  csv << "path,kind,slots,keys,round_trip,violations,ok\n"
      << path << ',' << to_string(chk.kind) << ',' << chk.slots << ',' << chk.keys << ',' << chk.round_trip << ','
      << chk.violations.size() << ',' << chk.ok() << '\n';
  write_text(c.format == "json" ? j.dump(2) + "\n" : csv.str(), c.out);
  for (const auto& v : chk.violations) std::cerr << "violation: " << v << '\n';
  return chk.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rainbow hashing workbench"};
  app.require_subcommand(1);

  Common geo, cell, tree, eps, hard, uni, val;
  auto* g = app.add_subcommand("geometry", "Dump the level schedule and colour distribution for capacity --n");
  add_common(g, geo, false);

  auto* cb = app.add_subcommand("cell-bench", "Delete/insert workload on a single rainbow cell");
  add_common(cb, cell, false);
  add_run_extras(cb, cell);

  auto* tb = app.add_subcommand("tree-bench", "Delete/insert workload on the load-1 tree");
  add_common(tb, tree, false);
  add_run_extras(tb, tree);
  bool resizable = false;
  tb->add_flag("--resizable", resizable, "Use the resizable tree (size moves with each update)");
  tb->add_option("--snapshot", tree.snapshot, "Write a binary snapshot of the final table");

  auto* eb = app.add_subcommand("eps-bench", "Delete/insert workload on the load 1 - eps table, one row per --epsilon");
  add_common(eb, eps, true);
  add_run_extras(eb, eps);
  eb->add_option("--table", eps.table, "Table kind")->check(CLI::IsMember({"rainbow", "rainbow-fixed", "linear", "uniform"}));
  eb->add_option("--snapshot", eps.snapshot, "Write a binary snapshot of the final table (rainbow only)");

  auto* hd = app.add_subcommand("hard-dist", "Random delete/insert pairs over n random keys on any table");
  add_common(hd, hard, false);
  add_run_extras(hd, hard);
  hd->add_option("--table", hard.table, "Table kind")
      ->check(CLI::IsMember({"rainbow", "rainbow-fixed", "linear", "uniform", "cell", "tree", "resizable"}));

  UniformizeArgs ua;
  auto* un = app.add_subcommand("uniformize", "Transform and certify probe functions over a finite universe");
  uni.n = 512;
  add_common(un, uni, false);
  un->add_option("--universe", ua.universe, "Universe size U")->check(CLI::Range(uint64_t{1}, kMaxUniverse));
  un->add_option("--slots", ua.slots, "Slots N")->check(CLI::Range(uint64_t{8}, uint64_t{1} << 24));
  un->add_option("--length", ua.length, "Probe sequence length");
  un->add_option("--imax", ua.imax, "Largest position analysed")->check(CLI::Range(uint64_t{1}, uint64_t{64}));
  un->add_option("--assignments", ua.assignments, "Sampled assignments");
  un->add_option("--family", ua.families, "Probe families (default: 10 random + 3 adversarial)");

  std::string snap_path;
  auto* vs = app.add_subcommand("validate-snapshot", "Load a snapshot, validate it and check the bit-exact round trip");
  vs->add_option("path", snap_path, "Snapshot file")->required();
  vs->add_option("--format", val.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  vs->add_option("--out", val.out, "Report path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return run_geometry(geo);
    if (*cb) return run_bench(cell, TableKind::Cell);
    if (*tb) return run_bench(tree, resizable ? TableKind::Resizable : TableKind::Tree);
    if (*eb) return run_bench(eps, parse_table_kind(eps.table));
    if (*hd) return run_bench(hard, parse_table_kind(hard.table));
    if (*un) return run_uniformize(uni, ua);
    if (*vs) return run_validate(snap_path, val);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
