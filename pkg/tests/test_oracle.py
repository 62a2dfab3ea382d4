import csv
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from crnpp.errors import OracleError, OracleTieError
from crnpp.frontend import load
from crnpp.oracle import EQ, GT, LT, TIE, compare, exact_sqrt, expected_series, interpret
from crnpp.programs import read_directives, resolve


def run(name, cycles=6, **bindings):
    src = resolve(name).read_text()
    params = {**read_directives(src).params, **bindings}
    return interpret(load(src), params, cycles)


def at_phase(tl, species, phase):
    return [e.env[species] for e in tl if e.phase == phase]


def test_gcd_converges_to_four():
    tl = run("gcd")
    assert at_phase(tl, "a", 2)[:5] == [20, 8, 8, 4, 4]
    assert tl.final("a") == 4 and tl.final("b") == 4
    assert [e.flag for e in tl if e.phase == 2][:5] == [GT, GT, LT, GT, EQ]


def test_factorial():
    assert run("factorial", cycles=6).final("f") == 120


def test_integer_division():
    tl = run("int_division", cycles=10)
    assert (tl.final("q"), tl.final("r")) == (6, 2)


def test_integer_sqrt():
    tl = run("int_sqrt", cycles=8)
    assert tl.final("out") == 3


def test_counter_sequence():
    assert at_phase(run("counter", cycles=4), "c", 2) == [2, 1, 0, 3]


def test_euler_partial_sums():
    e = at_phase(run("euler", cycles=5), "e", 1)
    expected = [Fraction(2), Fraction(5, 2), Fraction(8, 3), Fraction(65, 24), Fraction(163, 60)]
    assert e == expected
    assert float(e[-1]) == pytest.approx(2.7167, abs=1e-4)


def test_pi_is_exactly_computed():
    tl = run("pi", cycles=8)
    assert 3.0 < float(tl.final("pi")) < 3.2


@pytest.mark.parametrize("x,y,outcome", [
    (3, 1, GT), (1, 3, LT), (2, 2, EQ), (Fraction(21, 10), 2, EQ),
    (Fraction(5, 2), 2, TIE), (2, Fraction(5, 2), TIE),
])
def test_compare(x, y, outcome):
    assert compare(Fraction(x), Fraction(y), Fraction(1, 2)) == outcome


def test_exact_sqrt():
    assert exact_sqrt(Fraction(9, 4)) == Fraction(3, 2)
    assert abs(exact_sqrt(Fraction(2)) ** 2 - 2) < Fraction(1, 10**50)
    with pytest.raises(OracleError):
        exact_sqrt(Fraction(-1))


TIE_SRC = """
crn = { conc[a, 5/2], conc[b, 2],
  step[{ cmp[a, b] }],
  step[{ ifGT[{ ld[a, c] }], ifLT[{ ld[b, c] }] }] }
"""


def test_tie_non_strict_skips_and_annotates():
    tl = interpret(load(TIE_SRC), n_cycles=2)
    assert all(e.flag == TIE for e in tl)
    assert tl.final("c") == 0
    notes = tl.annotations()
    assert notes and "ifGT" in notes[0][1] and "tied" in notes[0][1]


def test_tie_strict_raises():
    with pytest.raises(OracleTieError):
        interpret(load(TIE_SRC), n_cycles=1, strict=True)


def test_epsilon_controls_tie_band():
    tl = interpret(load(TIE_SRC), n_cycles=1, epsilon=Fraction(1, 4))
    assert tl.final("c") == Fraction(5, 2)


def test_explicit_rxn_is_rejected():
    with pytest.raises(OracleError, match="rxn"):
        interpret(load("crn = { conc[a,1], step[{ rxn[a, nil, 1] }] }"))


def test_division_by_zero():
    with pytest.raises(OracleError, match="division by zero"):
        interpret(load("crn = { conc[a,1], step[{ div[a, b, c] }] }"))


def test_unknown_species():
    with pytest.raises(OracleError):
        expected_series(run("gcd", cycles=1), "nope")


def test_series_uses_initial_before_first_phase():
    s = expected_series(run("gcd", cycles=2), "a")
    assert s(-1) == 32 and s(0) == 32 and s(2) == 20
    assert len(s) == 6
    with pytest.raises(IndexError):
        s(6)


def test_padding_phase_of_single_step_program():
    tl = interpret(load("crn = { conc[a,6], step[{ ld[a,b] }] }"), n_cycles=2)
    assert [(e.phase, e.step) for e in tl] == [(0, 0), (1, -1), (0, 0), (1, -1)]
    assert tl.final("b") == 6


def test_timeline_csv(tmp_path):
    tl = run("gcd", cycles=2)
    tl.write_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["cycle", "phase", *tl.species, "flag"]
    assert len(rows) == 1 + len(tl)
    assert rows[3][-1] == GT


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 8))
def test_prefix_property(a0, b0, n):
    vp = load(resolve("gcd").read_text())
    short = interpret(vp, {"a0": a0, "b0": b0}, n)
    long = interpret(vp, {"a0": a0, "b0": b0}, n + 3)
    assert long.entries[: len(short)] == short.entries


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30))
def test_gcd_matches_math(a0, b0):
    import math

    tl = interpret(load(resolve("gcd").read_text()), {"a0": a0, "b0": b0}, a0 + b0 + 2)
    assert tl.final("a") == math.gcd(a0, b0)
