"""Both kernel builds against each other and against an independent reference."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from crnpp import kernels
from crnpp.crn import Crn, mass_action_odes, rxn

BACKENDS = kernels.available()


def reference_rhs(crn, species):
    """Mass action written out term by term, sharing no code with the kernels."""
    index = {s: i for i, s in enumerate(species)}

    def f(t, y):
        d = [0.0] * len(species)
        for r in crn.reactions:
            flux = r.rate
            for s, m in r.reactants.items():
                flux *= y[index[s]] ** m
            for s in set(r.reactants) | set(r.products):
                d[index[s]] += (r.products.get(s, 0) - r.reactants.get(s, 0)) * flux
        return d

    return f


def random_crn(draw_reactions):
    return Crn(tuple(rxn(r, p, k) for r, p, k in draw_reactions), {})


reaction = st.tuples(st.lists(st.sampled_from("ABCD"), min_size=1, max_size=2),
                     st.lists(st.sampled_from("ABCD"), max_size=3),
                     st.floats(0.1, 3.0))


def test_both_backends_built():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


@pytest.mark.parametrize("backend", BACKENDS)
@settings(max_examples=100, deadline=None)
@given(st.lists(reaction, min_size=1, max_size=6),
       st.lists(st.floats(0, 4), min_size=4, max_size=4))
def test_rhs_matches_reference(backend, reactions, values):
    crn = random_crn(reactions)
    ode = mass_action_odes(crn)
    y = np.array(values[: len(ode.species)])
    impl = kernels.load(backend)
    expected = reference_rhs(crn, ode.species)(0.0, y)
    np.testing.assert_allclose(impl.rhs(y, ode.packed), expected, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_annihilation_closed_form(backend):
    ode = mass_action_odes(Crn((rxn("A B", []),), {"A": 1, "B": 1}))
    res = kernels.load(backend).integrate(ode.packed, np.array([1.0, 1.0]), 0.0, 20.0,
                                          1e-10, 1e-12, 0.5)
    assert res.status == kernels.OK
    assert res.times[0] == 0.0 and res.times[-1] == 20.0
    assert np.all(np.diff(res.times) > 0)
    err = np.abs(res.states[:, 0] - 1.0 / (1.0 + res.times))
    assert err.max() < 1e-8


def test_backends_agree_on_a_compiled_program():
    from crnpp.compiler import compile_program
    from crnpp.frontend import load
    from crnpp.programs import resolve

    cp = compile_program(load(resolve("gcd").read_text()), {"a0": 32, "b0": 12})
    ode = mass_action_odes(cp.crn)
    y0 = np.array([cp.crn.concentrations()[s] for s in ode.species])
    finals = []
    for b in BACKENDS:
        res = kernels.load(b).integrate(ode.packed, y0, 0.0, 150.0, 1e-8, 1e-14, 1.0)
        assert res.status == kernels.OK
        finals.append(res.states[-1])
    for f in finals[1:]:
        np.testing.assert_allclose(f, finals[0], rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_against_scipy(backend):
    crn = Crn((rxn("A B", "A B C"), rxn("C", []), rxn("C C", "D", 0.5), rxn("D", "A")),
              {"A": 2, "B": 1.5})
    ode = mass_action_odes(crn)
    y0 = np.array([crn.concentrations()[s] for s in ode.species])
    res = kernels.load(backend).integrate(ode.packed, y0, 0.0, 10.0, 1e-10, 1e-12, 0.5)
    ref = solve_ivp(reference_rhs(crn, ode.species), (0, 10), y0, method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    np.testing.assert_allclose(res.states, ref.sol(res.times).T, rtol=1e-7, atol=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_overflow_and_step_budget(backend):
    ode = mass_action_odes(Crn((rxn("A", "A A"),), {"A": 1}))
    impl = kernels.load(backend)
    res = impl.integrate(ode.packed, np.array([1.0]), 0.0, 100.0, 1e-8, 1e-10, 1.0)
    assert res.status == kernels.OVERFLOW
    assert res.states[-1, 0] > 1e12
    res = impl.integrate(ode.packed, np.array([1.0]), 0.0, 100.0, 1e-8, 1e-10, 1.0,
                         max_steps=5)
    assert res.status == kernels.TOO_MANY_STEPS


@pytest.mark.parametrize("backend", BACKENDS)
def test_clamping_records_raw_minimum(backend):
    # fast decay undershoots zero with loose tolerances
    ode = mass_action_odes(Crn((rxn("A B", []),), {"A": 1, "B": 1.0}))
    res = kernels.load(backend).integrate(ode.packed, np.array([1.0, 1.0 + 1e-9]), 0.0, 1e3,
                                          1e-3, 1e-3, 100.0)
    assert res.states.min() >= 0.0
    assert res.min_raw <= 0.0


@pytest.mark.parametrize("backend", BACKENDS)
def test_per_species_tolerance(backend):
    ode = mass_action_odes(Crn((rxn("A", []),), {"A": 1}))
    impl = kernels.load(backend)
    loose = impl.integrate(ode.packed, np.array([1.0]), 0.0, 30.0, 1e-6, np.array([1e-3]), 5.0)
    tight = impl.integrate(ode.packed, np.array([1.0]), 0.0, 30.0, 1e-6, np.array([1e-30]), 5.0)
    assert tight.n_steps > loose.n_steps
    assert abs(tight.states[-1, 0] - math.exp(-30)) < 1e-6 * math.exp(-30) * 10
