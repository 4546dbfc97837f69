import csv
import io
import json

import pytest

import rainbowhash as rh


def test_tree_roundtrip():
    keys = list(range(1, 1001))
    t = rh.make_table("tree", 1000, seed=3)
    t.build(keys)
    assert len(t) == 1000
    assert all(k in t for k in keys[::17])
    assert 5000 not in t
    r = t.erase(10)
    assert r["moves"] >= 0
    t.insert(5000)
    assert t.query(5000)["found"]
    assert t.check() == []


def test_probe_log_matches_sequence():
    t = rh.make_table("rainbow", 4000, epsilon=0.25, seed=2)
    t.build(list(range(1, 4001)))
    pc = t.probe_complexity(1234)
    seq = t.probe_sequence(1234, pc)
    assert len(seq) == pc
    assert t.query(1234)["slot"] == seq[-1]


def test_typed_errors():
    t = rh.make_table("linear", 100, epsilon=0.1)
    t.build([1, 2, 3])
    with pytest.raises(KeyError):
        t.erase(99)
    with pytest.raises(ValueError):
        rh.make_table("cuckoo", 100)


def test_report_formats_agree():
    text = rh.hard_distribution("linear", 256, pairs=256, seed=4)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 1 and rows[0]["table"] == "linear"
    data = json.loads(rh.hard_distribution("linear", 256, pairs=256, seed=4, format="json"))
    assert data[0]["updates"] == int(rows[0]["updates"]) == 512
    assert rh.hard_distribution("linear", 256, pairs=256, seed=4) == text


def test_snapshot_validates():
    t = rh.make_table("tree", 2000, seed=1)
    t.build(list(range(1, 2001)))
    blob = t.snapshot()
    assert rh.validate_snapshot(blob)["ok"]
    with pytest.raises(ValueError):
        rh.validate_snapshot(b"garbage")
    assert rh.make_table("linear", 10).snapshot() is None


def test_geometry_and_levels():
    g = rh.geometry(4096)
    assert g["capacity"] == 4096 and g["windows_ok"]
    assert abs(sum(l["p"] for l in g["levels"]) - 1.0) < 1e-9
    assert rh.level_count(1 / 256) == 2
    assert rh.probe_level(17, 1 / 256) == 1


def test_uniformize_adversarial():
    out = rh.certify_uniformize("slot-zero-first")
    assert out["ok"] and out["moved"] > 0
    assert rh.certify_uniformize("permutation")["moved"] == 0
