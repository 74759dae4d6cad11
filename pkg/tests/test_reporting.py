import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roptd.interior import SolveReport, StageRecord
from roptd.model import FactorSpec, build_grid
from roptd.reporting import (
    dumps_report,
    load_report,
    read_weights_csv,
    round_design,
    write_exact_design,
    write_report,
)

from problems import bundled


def test_round_half_half():
    assert round_design([0.5, 0, 0.5], 10).counts.tolist() == [5, 0, 5]


def test_round_largest_remainder():
    assert round_design([0.2532, 0.2138, 0.5330], 20).counts.tolist() == [5, 4, 11]


def test_round_one_run_each():
    assert round_design([0.4, 0.35, 0.25], 3).counts.tolist() == [1, 1, 1]


def test_round_ties_to_lower_index():
    assert round_design([0.25, 0.25, 0.25, 0.25], 6).counts.tolist() == [2, 2, 1, 1]


def test_round_too_few_runs():
    with pytest.raises(ValueError, match="n >= 3"):
        round_design([0.2, 0.3, 0.5], 2)


def test_round_runs_carry_points():
    sp = build_grid([FactorSpec.continuous("x", -1, 1, 3)])
    d = round_design([0.5, 0, 0.5], 4, sp)
    assert d.runs == [((-1.0,), 2), ((1.0,), 2)]


@settings(max_examples=200)
@given(st.lists(st.floats(0.001, 1.0), min_size=1, max_size=12), st.integers(0, 200))
def test_round_properties(raw, extra):
    w = np.array(raw) / np.sum(raw)
    n = len(w) + extra
    c = round_design(w, n).counts
    assert c.sum() == n and np.all(c >= 0)
    # each count is floor or ceil of n w_j
    assert np.all(np.abs(c - n * w) < 1 + 1e-9)
    # idempotent on its own empirical measure
    assert round_design(c / n, n).counts.tolist() == c.tolist()


def _toy_report(converged=True):
    return SolveReport(weights=np.array([0.5, 0.0, 0.5]), loss=0.0, max_d=0.0 if converged else 0.3,
                       converged=converged, d_values=np.array([0.0, -1.0, 0.0]),
                       outer_trace=[StageRecord(2.0, 5, 1.0, 0.0, 0.0, "gradient")],
                       support=[((-1.0,), 0.5), ((1.0,), 0.5)],
                       options={"support_threshold": 1e-5, "delta": 1e-8}, extra={"n": np.int64(3)})


def test_json_round_trip(tmp_path):
    _, rep = bundled("example1.cfg")
    p = write_report(rep, "json", tmp_path / "r.json")
    back = load_report(p)
    np.testing.assert_array_equal(back.weights, rep.weights)
    np.testing.assert_array_equal(back.d_values, rep.d_values)
    for f in ("loss", "max_d", "converged", "algorithm", "working", "options", "outer_trace"):
        assert getattr(back, f) == getattr(rep, f)
    assert back.support == rep.support
    assert json.loads(json.dumps(back.extra)) == json.loads(json.dumps(rep.extra))
    assert dumps_report(back) == dumps_report(rep)


def test_json_contents():
    data = json.loads(dumps_report(_toy_report()))
    assert data["schema_version"] == 1 and data["n_support"] == 2
    assert data["d_stats"] == {"argmax": 0, "max": 0.0, "min": -1.0, "support_abs_max": 0.0,
                               "weighted_mean": 0.0}
    assert data["extra"]["n"] == 3


def test_unconverged_report_serialises(tmp_path):
    p = write_report(_toy_report(converged=False), "json", tmp_path / "r.json")
    assert load_report(p).converged is False


def test_serialisation_deterministic(tmp_path):
    _, rep = bundled("example1.cfg")
    a = write_report(rep, "json", tmp_path / "a.json").read_bytes()
    b = write_report(rep, "json", tmp_path / "b.json").read_bytes()
    assert a == b


def test_support_csv_example1(tmp_path):
    cfg, rep = bundled("example1.cfg")
    lines = write_report(rep, "csv", tmp_path / "s.csv", names=cfg.space.names).read_text().splitlines()
    assert lines[0] == "x1,x2,weight" and len(lines) == 10
    assert lines[1] == "-1,-5,0.1304"
    pts = [tuple(float(v) for v in ln.split(",")[:2]) for ln in lines[1:]]
    assert pts == sorted(pts)


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        write_report(_toy_report(), "xml", tmp_path / "r.xml")


def test_weights_csv_round_trip(tmp_path):
    cfg, rep = bundled("example1.cfg")
    p = write_report(rep, "csv", tmp_path / "s.csv", names=cfg.space.names)
    w = read_weights_csv(p, cfg.space)
    assert abs(w.sum() - 1) < 1e-15 and np.count_nonzero(w) == 9
    assert np.max(np.abs(w - rep.weights)) < 1e-4


def test_weights_csv_errors(tmp_path):
    sp = build_grid([FactorSpec.continuous("x", -1, 1, 3)])
    p = tmp_path / "w.csv"
    p.write_text("x,weight\n0.5,1.0\n")
    with pytest.raises(ValueError, match=":2:"):
        read_weights_csv(p, sp)
    p.write_text("y,weight\n0,1.0\n")
    with pytest.raises(ValueError, match="missing columns"):
        read_weights_csv(p, sp)
    p.write_text("x,weight\n0,0.5\n")
    with pytest.raises(ValueError, match="sum"):
        read_weights_csv(p, sp)


def test_exact_design_csv(tmp_path):
    sp = build_grid([FactorSpec.continuous("x", 0, 100, 101)])
    w = np.zeros(101)
    w[[1, 4, 100]] = [0.2532, 0.2138, 0.5330]
    d = round_design(w, 20, sp)
    text = write_exact_design(d, sp.names, tmp_path / "e.csv").read_text()
    assert text == "x,runs\n1,5\n4,4\n100,11\n"
