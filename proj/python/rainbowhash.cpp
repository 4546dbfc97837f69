#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rainbow/errors.hpp"
#include "rainbow/geometry.hpp"
#include "rainbow/snapshot.hpp"
#include "rainbow/uniformize.hpp"
#include "rainbow/workbench.hpp"

namespace py = pybind11;
using namespace rainbow;

namespace {

py::dict query_dict(const QueryResult& q) {
  py::dict d;
  d["found"] = q.found;
  d["slot"] = q.found ? py::object(py::int_(q.slot)) : py::object(py::none());
  d["probes"] = q.probes;
  return d;
}

py::dict receipt_dict(const OpReceipt& r) {
  py::dict d;
  d["moves"] = r.moves();
  d["probes"] = r.probes;
  d["wall_steps"] = r.wall_steps;
  d["rebuilds"] = r.rebuilds.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(rainbowhash, m) {
  m.doc() = "Rainbow hash tables: load-1 trees, load 1 - eps tables, baselines and the workload harness";

  py::register_exception<KeyError>(m, "KeyError", PyExc_KeyError);
  py::register_exception<CapacityError>(m, "CapacityError", PyExc_RuntimeError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<SnapshotError>(m, "SnapshotError", PyExc_ValueError);

  py::class_<Table>(m, "Table")
      .def_property_readonly("kind", [](const Table& t) { return to_string(t.kind()); })
      .def("build", [](Table& t, const std::vector<uint64_t>& keys) { return receipt_dict(t.build(keys)); })
      .def("insert", [](Table& t, uint64_t key) { return receipt_dict(t.insert(key)); })
      .def("erase", [](Table& t, uint64_t key) { return receipt_dict(t.erase(key)); })
      .def("query", [](const Table& t, uint64_t key) { return query_dict(t.query(key)); })
      .def("__contains__", [](const Table& t, uint64_t key) { return t.query(key).found; })
      .def("__len__", &Table::size)
      .def("probe_sequence", &Table::probe_sequence, py::arg("key"), py::arg("limit") = 64)
      .def("probe_complexity", &Table::probe_complexity)
      .def("slots", &Table::slots)
      .def_property_readonly("slot_count", &Table::slot_count)
      .def("check", &Table::check)
      .def("snapshot", [](const Table& t) -> py::object {
        const auto s = t.snapshot();
        if (!s) return py::none();
        const auto bytes = encode(*s);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      });

  m.def(
      "make_table",
      [](const std::string& kind, uint64_t n, double epsilon, uint64_t seed) {
        return make_table({parse_table_kind(kind), n, epsilon, seed});
      },
      py::arg("kind"), py::arg("n"), py::arg("epsilon") = 1.0 / 16, py::arg("seed") = 1,
      "Table sized for n keys: cell, tree, resizable, rainbow, rainbow-fixed, linear or uniform");

  m.def(
      "hard_distribution",
      [](const std::string& kind, uint64_t n, double epsilon, uint64_t pairs, uint64_t seed, const std::string& format) {
        WorkloadSpec w;
        w.table = {parse_table_kind(kind), n, epsilon, seed};
        w.pairs = pairs;
        const MetricsReport r = run_hard_distribution(w);
        return format == "json" ? to_json({r}) : to_csv({r});
      },
      py::arg("kind"), py::arg("n"), py::arg("epsilon") = 1.0 / 16, py::arg("pairs") = 0, py::arg("seed") = 1,
      py::arg("format") = "csv", "Run the delete/insert workload and return the report text");

  m.def("level_count", &level_count);
  m.def("probe_level", &probe_level);

  m.def(
      "geometry",
      [](uint64_t capacity) {
        const TreeGeometry g = derive_geometry(capacity);
        const ColorDistribution c = solve_color_distribution(g, capacity);
        py::list levels;
        for (int i = g.levels(); i >= 2; --i) {
          py::dict d;
          d["level"] = i;
          d["n"] = g.n(i);
          d["buffer"] = g.b(i);
          d["fanout"] = g.f(i);
          d["subproblems"] = g.m(i);
          d["p"] = c.probability(i);
          levels.append(d);
        }
        py::dict out;
        out["capacity"] = g.capacity();
        out["leaves"] = g.m1();
        out["levels"] = levels;
        out["windows_ok"] = eq1_window_violation(g, c) == 0;
        return out;
      },
      py::arg("capacity"));

  m.def(
      "certify_uniformize",
      [](const std::string& family, uint64_t universe, uint64_t slots, uint64_t length, uint64_t n, uint64_t seed) {
        const ProbeFunction h = make_probe_function(parse_probe_family(family), universe, slots, length, seed);
        const UniformizeResult u = uniformize(h, n, 32);
        const Certification c = certify(h, u, n, 32, 20, seed);
        py::dict d;
        d["bad_pairs"] = u.bad_pairs;
        d["moved"] = u.moved;
        d["max_q_ratio"] = c.max_q_ratio;
        d["ok"] = c.ok();
        return d;
      },
      py::arg("family"), py::arg("universe") = 1 << 14, py::arg("slots") = 256, py::arg("length") = 32,
      py::arg("n") = 128, py::arg("seed") = 1);

  m.def("validate_snapshot", [](const py::bytes& data) {
    const std::string s = data;
    const SnapshotCheck c = validate_snapshot(std::vector<uint8_t>(s.begin(), s.end()));
    py::dict d;
    d["kind"] = to_string(c.kind);
    d["slots"] = c.slots;
    d["keys"] = c.keys;
    d["round_trip"] = c.round_trip;
    d["violations"] = c.violations;
    d["ok"] = c.ok();
    return d;
  });
}
