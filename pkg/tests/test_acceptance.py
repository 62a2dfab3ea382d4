"""End-to-end acceptance checks, one test per criterion.

Each test is tagged with ``criterion(n, title)``; the conftest hook prints one
PASS/FAIL line per criterion after the run.
"""

import numpy as np
import pytest

from crnpp import kernels
from crnpp.analysis import evaluate_error, grid, sweep_module_error
from crnpp.compiler import FlagSet, compile_program, expand_cmp
from crnpp.crn import Crn, mass_action_odes, rxn
from crnpp.frontend import Module, load
from crnpp.oracle import interpret
from crnpp.programs import (
    PUBLISHED_SIZES,
    list_programs,
    read_directives,
    resolve,
    size_report,
)
from crnpp.simulator import IdealClock, Oscillator, sample_at_phase_ends, simulate

criterion = pytest.mark.criterion


def corpus(name, **override):
    src = resolve(name).read_text()
    d = read_directives(src)
    return load(src), {**d.params, **override}, d.track


def integrate(crn, t_end, max_step=0.05):
    ode = mass_action_odes(crn)
    init = crn.concentrations()
    y0 = np.array([init[s] for s in ode.species])
    res = kernels.impl.integrate(ode.packed, y0, 0.0, t_end, 1e-11, 1e-13, max_step)
    assert res.status == kernels.OK
    return ode, res


def phase_end_values(name, species, backend, cycles, phase=None, **override):
    vp, params, _ = corpus(name, **override)
    cp = compile_program(vp, params)
    samples = sample_at_phase_ends(simulate(cp, backend, cycles=cycles), cp.schedule)
    last = cp.schedule.total_phases - 1 if phase is None else phase
    return [s.values[species] for s in samples if s.phase == last]


def final_value(name, species, backend, cycles, **override):
    return phase_end_values(name, species, backend, cycles, **override)[-1]


@criterion(1, "closed-form fidelity of addition and annihilation")
def test_closed_forms(record_property):
    add = Crn((rxn("A", "A C"), rxn("B", "B C"), rxn("C", [])), {"A": 2, "B": 3})
    ode, res = integrate(add, 20.0)
    c = res.states[:, ode.index["C"]]
    dev_add = np.max(np.abs(c - 5.0 * (1.0 - np.exp(-res.times))))
    ann = Crn((rxn("A B", []),), {"A": 1, "B": 1})
    ode, res = integrate(ann, 20.0)
    a = res.states[:, ode.index["A"]]
    dev_ann = np.max(np.abs(a - 1.0 / (1.0 + res.times)))
    record_property("detail", f"max dev add {dev_add:.1e}, annihilation {dev_ann:.1e}")
    assert res.times[-1] == 20.0
    assert dev_add <= 1e-6 and dev_ann <= 1e-6


@criterion(2, "multiplication reaches 12 by t=15")
def test_multiplication(record_property):
    crn = Crn((rxn("A B", "A B C"), rxn("C", [])), {"A": 6, "B": 2})
    ode, res = integrate(crn, 15.0)
    c = res.states[-1, ode.index["C"]]
    record_property("detail", f"C(15) = {c:.6f}")
    assert abs(c - 12) <= 0.12


@criterion(3, "GCD(32,12) under both clocks")
@pytest.mark.parametrize("backend", [IdealClock(), Oscillator()], ids=lambda b: b.name)
def test_gcd(backend, record_property):
    vp, params, _ = corpus("gcd")
    assert interpret(vp, params, 6).final("a") == 4
    a = final_value("gcd", "a", backend, 6)
    record_property("detail", f"{backend.name}: a = {a:.4f}")
    assert abs(a - 4) <= 0.5


@criterion(4, "counter counts 3,2,1 and resets")
def test_counter(record_property):
    c = phase_end_values("counter", "c", Oscillator(), 8)
    vp, params, _ = corpus("counter")
    tl = interpret(vp, params, 8)
    expected = [float(e.env["c"]) for e in tl if e.phase == 2]
    record_property("detail", "c = " + ", ".join(f"{v:.2f}" for v in c))
    seq = [3.0] + c
    rounded = [round(v) for v in seq]
    assert rounded[:5] == [3, 2, 1, 0, 3]
    assert rounded[4:8] == [3, 2, 1, 0]
    assert max(abs(x - y) for x, y in zip(c, expected)) <= 0.5


@criterion(5, "factorial 5! within 2%")
def test_factorial(record_property):
    f = final_value("factorial", "f", Oscillator(), 6)
    record_property("detail", f"f = {f:.3f}")
    assert abs(f - 120) <= 0.02 * 120


@criterion(6, "integer division 20/3")
def test_integer_division(record_property):
    vp, params, _ = corpus("int_division")
    cp = compile_program(vp, params)
    samples = sample_at_phase_ends(simulate(cp, Oscillator(), cycles=10), cp.schedule)
    q, r = samples[-1].values["q"], samples[-1].values["r"]
    record_property("detail", f"q = {q:.4f}, r = {r:.4f}")
    assert abs(q - 6) <= 0.5 and abs(r - 2) <= 0.5


@criterion(7, "integer square root of 10")
def test_integer_sqrt(record_property):
    out = final_value("int_sqrt", "out", Oscillator(), 8)
    record_property("detail", f"out = {out:.4f}")
    assert abs(out - 3) <= 0.5


@criterion(8, "Euler's number under the ideal clock")
def test_euler(record_property):
    e = final_value("euler", "e", IdealClock(), 8)
    osc = final_value("euler", "e", Oscillator(), 8)
    record_property("detail", f"ideal e = {e:.6f}, oscillator e = {osc:.5f} (reported)")
    assert abs(e - 2.71828) <= 1e-3


@pytest.fixture(scope="module")
def pi_and_euler_errors():
    out = {}
    for name in ("pi", "euler"):
        vp, params, track = corpus(name)
        out[name] = evaluate_error(vp, params, tracked=track, cycles=8,
                                   backend=Oscillator()).max_error
    return out


@criterion(9, "pi after 8 cycles, error above Euler's")
def test_pi(pi_and_euler_errors, record_property):
    pi = final_value("pi", "pi", Oscillator(), 8)
    err = pi_and_euler_errors
    record_property("detail", f"pi = {pi:.5f}; max error pi {err['pi']:.3g} vs "
                              f"euler {err['euler']:.3g}")
    assert 3.15 <= pi <= 3.25
    assert err["pi"] > err["euler"]


def _flags_after(reactions, initial, t_end):
    ode, res = integrate(Crn(tuple(reactions), initial), t_end, max_step=0.01)
    return ode, res


@criterion(10, "comparison normalization and approximate majority")
def test_cmp_and_am(record_property):
    f = FlagSet()
    norm, am, flags = expand_cmp(Module("cmp", ("x", "y")), f)
    init = {**flags.initial(0.0), "x": 80.0, "y": 20.0}
    del init[f.offset]
    ode, res = _flags_after(norm, init, 2.0)
    end = res.states[-1]
    norm_xy = (end[ode.index[f.x_gt_y]], end[ode.index[f.x_lt_y]])
    norm_yx = (end[ode.index[f.y_lt_x]], end[ode.index[f.y_gt_x]])

    ode, res = _flags_after(am[:4], {f.x_gt_y: 0.8, f.x_lt_y: 0.2}, 40.0)
    hi, lo = res.states[:, ode.index[f.x_gt_y]], res.states[:, ode.index[f.x_lt_y]]
    b = res.states[:, ode.index[f.b_x]]
    prod = hi * lo
    window = (prod < 1e-2) & (prod > 1e-10)
    slope = float(np.polyfit(res.times[window], np.log(prod[window]), 1)[0])
    am_end = (hi[-1], lo[-1], b[-1])

    ode, res = _flags_after(am[:4], {f.x_gt_y: 0.5, f.x_lt_y: 0.5}, 60.0)
    tie_end = [res.states[-1, ode.index[s]] for s in (f.x_gt_y, f.x_lt_y, f.b_x)]

    record_property("detail", f"norm ({norm_xy[0]:.4f}, {norm_xy[1]:.4f}); AM end "
                              f"({am_end[0]:.4f}, {am_end[1]:.1e}, {am_end[2]:.1e}), "
                              f"log-slope {slope:.3f}; tie -> "
                              + ", ".join(f"{v:.4f}" for v in tie_end))
    np.testing.assert_allclose(norm_xy, (0.8, 0.2), atol=1e-3)
    np.testing.assert_allclose(norm_yx, (0.8, 0.2), atol=1e-3)
    np.testing.assert_allclose(am_end, (1.0, 0.0, 0.0), atol=1e-3)
    assert slope <= -0.8
    np.testing.assert_allclose(tie_end, [1 / 3] * 3, atol=1e-3)


@criterion(11, "compiled sizes within 30% of the published counts")
def test_sizes(record_property):
    compiled = {}
    for name in PUBLISHED_SIZES:
        vp, params, _ = corpus(name)
        compiled[name] = compile_program(vp, params)
    report = size_report(compiled)
    print(report)
    misses = []
    for name, (species, reactions) in PUBLISHED_SIZES.items():
        cp = compiled[name]
        ours = (len(cp.crn.species), len(cp.crn.reactions))
        if (abs(ours[0] - species) > 0.3 * species or abs(ours[1] - reactions) > 0.3 * reactions):
            misses.append(f"{name} {ours[0]}/{ours[1]} vs {species}/{reactions}")
    record_property("detail", "outside tolerance: " + (", ".join(misses) or "none"))
    assert "Breakdown:" in report
    assert not misses


@pytest.fixture(scope="module")
def surfaces():
    return {kind: sweep_module_error(kind) for kind in ("sub", "add", "mul")}


@criterion(12, "module error surface shapes")
def test_surface_shapes(surfaces, record_property):
    sub, add, mul = surfaces["sub"], surfaces["add"], surfaces["mul"]
    a, b = sub.argmax()
    asym_add = float(np.max(np.abs(add.errors - add.errors.T)))
    asym_mul = float(np.max(np.abs(mul.errors - mul.errors.T)))
    diag = np.diag(mul.errors)
    record_property("detail", f"sub argmax ({a:g}, {b:g}); asymmetry add {asym_add:.1e}, "
                              f"mul {asym_mul:.1e}; mul diagonal {diag[0]:.2e} -> {diag[-1]:.2e}")
    assert abs(a - b) <= 0.5
    assert asym_add <= 1e-6 and asym_mul <= 1e-6
    assert np.all(np.diff(diag) > 0)
    assert sub.a_values == grid()


CONTINUOUS = {"euler", "pi"}


@criterion(13, "ideal-clock samples match the interpreter for 5 cycles")
@pytest.mark.parametrize("name", list_programs())
def test_oracle_equivalence(name, record_property):
    vp, params, track = corpus(name)
    rep = evaluate_error(vp, params, tracked=track or None, cycles=5,
                         backend=IdealClock(200.0))
    assert rep.rows
    if name in CONTINUOUS:
        worst = max(r.error / max(abs(r.expected), 1e-12) for r in rep.rows)
        record_property("detail", f"{name}: max relative error {worst:.2e}")
        assert worst <= 1e-2
    else:
        record_property("detail", f"{name}: max abs error {rep.max_error:.2e}")
        assert rep.max_error <= 0.5


@criterion(14, "zeroing a phase's clock silences that phase")
@pytest.mark.parametrize("name", list_programs())
def test_isolation(name):
    vp, params, _ = corpus(name)
    cp = compile_program(vp, params)
    ode = mass_action_odes(cp.crn)
    phases = np.array([-1 if p is None else p for p in cp.phase_of_reaction()])
    rng = np.random.default_rng(7)
    for _ in range(100):
        y = rng.uniform(0.0, 10.0, len(ode))
        live = ode.fluxes(y)
        for phase in range(cp.schedule.total_phases):
            z = y.copy()
            z[ode.index[cp.schedule.catalyst_of_phase(phase)]] = 0.0
            flux = ode.fluxes(z)
            assert np.all(live[phases == phase] > 0.0)
            assert np.all(flux[phases == phase] == 0.0)
