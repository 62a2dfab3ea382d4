import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crnpp.analysis import (
    compare_subtraction_strategies,
    evaluate_error,
    exact_result,
    grid,
    sweep_module_error,
)
from crnpp.frontend import load
from crnpp.programs import read_directives, resolve
from crnpp.simulator import IdealClock, SolverConfig


def corpus(name):
    src = resolve(name).read_text()
    d = read_directives(src)
    return load(src), d.params, d.track


@pytest.fixture(scope="module")
def counter_report():
    vp, params, _ = corpus("counter")
    return evaluate_error(vp, params, tracked=["c"], cycles=4)


def test_rows_are_self_consistent(counter_report):
    for r in counter_report.rows:
        assert r.error == pytest.approx(abs(r.simulated - r.expected), abs=1e-15)
    assert counter_report.max_error == max(r.error for r in counter_report.rows)
    assert counter_report.final_error == counter_report.rows[-1].error
    assert [r.occurrence for r in counter_report.rows] == list(range(len(counter_report.rows)))


def test_counter_expectations(counter_report):
    last = [r.expected for r in counter_report.rows if r.phase == 2]
    assert last == [2, 1, 0, 3]
    assert counter_report.max_error < 0.5


def test_curve_is_defined_everywhere(counter_report):
    c = counter_report.curves["c"]
    assert len(c) == len(counter_report.curve_times)
    assert np.all(np.isfinite(c)) and np.all(c >= 0)


def test_conc_only_program_has_zero_error():
    vp = load("crn = { conc[a, 3], conc[b, 4], step[{ ld[a, b] }] }")
    rep = evaluate_error(vp, tracked=["a"], cycles=3)
    assert rep.max_error == 0.0


def test_unknown_tracked_species():
    vp, params, _ = corpus("gcd")
    with pytest.raises(ValueError):
        evaluate_error(vp, params, tracked=["zz"], cycles=1)


def test_duration_overrides_cycles():
    vp, params, _ = corpus("gcd")
    rep = evaluate_error(vp, params, 150.0, ["a"], cycles=5, backend=IdealClock(50.0))
    assert len(rep.rows) == 3


def test_tighter_tolerances_do_not_inflate_error():
    vp, params, _ = corpus("factorial")
    base = evaluate_error(vp, params, tracked=["f"], cycles=4)
    fine = evaluate_error(vp, params, tracked=["f"], cycles=4,
                          solver=SolverConfig(rel_tol=1e-9, abs_tol=1e-11))
    assert fine.max_error <= base.max_error * 1.1 + 1e-9


def test_error_csv(tmp_path, counter_report):
    counter_report.write_csv(tmp_path / "e.csv")
    counter_report.write_curve_csv(tmp_path / "c.csv", every=5)
    rows = list(csv.reader(open(tmp_path / "e.csv")))
    assert rows[0] == ["species", "occurrence", "cycle", "phase", "time", "simulated",
                       "expected", "error"]
    assert len(rows) == len(counter_report.rows) + 1
    assert list(csv.reader(open(tmp_path / "c.csv")))[0] == ["time", "c"]


def test_grid():
    g = grid()
    assert len(g) == 20 and g[0] == 0.5 and g[-1] == 10.0
    assert grid(1, 1, 1) == (1.0,)
    with pytest.raises(ValueError):
        grid(2, 1)


@pytest.mark.parametrize("kind", ["add", "mul"])
def test_commutative_surfaces_are_symmetric(kind):
    vals = grid(1, 5, 1)
    s = sweep_module_error(kind, vals, vals)
    np.testing.assert_allclose(s.errors, s.errors.T, atol=1e-6)


def test_sweep_is_deterministic(tmp_path):
    vals = (1.0, 3.0)
    a = sweep_module_error("div", vals, vals, workers=1)
    b = sweep_module_error("div", vals, vals, workers=4)
    np.testing.assert_array_equal(a.errors, b.errors)
    a.write_csv(tmp_path / "s.csv")
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["a\\b", "1", "3"] and rows[1][0] == "1"


def test_sweep_rejects_unknown_kind():
    with pytest.raises(ValueError):
        sweep_module_error("sqrt", (1.0,), (1.0,))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 10), st.floats(0.5, 10))
def test_add_error_is_small_after_long_phase(a, b):
    s = sweep_module_error("add", (a,), (b,), phase_duration=50.0)
    assert s.errors[0, 0] < 1e-6 * (a + b) + 1e-9
    assert exact_result("add", a, b) == a + b


def test_sub_error_peaks_on_diagonal():
    vals = grid(2, 10, 2)
    s = sweep_module_error("sub", vals, vals)
    diag = np.diag(s.errors)
    assert s.argmax() == (10.0, 10.0)
    assert all(diag[i] >= s.errors[i].max() - 1e-12 for i in range(len(vals)))


def test_subtraction_zero_b():
    c = compare_subtraction_strategies(5, 0)
    assert c.module_error < 1e-3
    assert c.alternative_error < 1e-3


def test_iterated_subtraction_beats_module_on_equal_operands():
    c = compare_subtraction_strategies(10, 10, phase_duration=10.0)
    assert c.alternative_error < c.module_error
    rows = c.alternative.rows
    assert len(rows) == 10 and rows[-1].expected == 0


def test_subtraction_needs_ordered_operands():
    with pytest.raises(ValueError):
        compare_subtraction_strategies(1, 3)


def test_alternative_error_stays_flat():
    c = compare_subtraction_strategies(10, 10)
    errors = [r.error for r in c.alternative.rows]
    assert max(errors[:-1]) < 1e-3
    assert abs(c.alternative.summary["a"].growth_rate) < 0.1 * c.module_error


@pytest.mark.parametrize("kind", ["add", "mul"])
def test_error_grows_along_rays(kind):
    s = sweep_module_error(kind, grid(1, 10, 1), grid(1, 10, 1))
    assert np.all(np.diff(s.errors, axis=0) >= 0)
    assert np.all(np.diff(s.errors, axis=1) >= 0)
