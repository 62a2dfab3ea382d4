"""Hot numerical kernels: mass-action right-hand side and a Dormand-Prince 5(4) integrator.

Two interchangeable implementations share one contract:

* ``crnpp._ckernels`` -- compiled Cython extension (default when built),
* ``crnpp._pykernels`` -- pure numpy fallback.

The implementation is chosen at import time; set ``CRNPP_PURE_PYTHON=1`` to force
the fallback. Both expose ``rhs(y, net)``, ``fluxes(y, net)`` and
``integrate(net, y0, t0, t1, rtol, atol, max_step, first_step, max_steps, overflow)``.
"""

from __future__ import annotations

import importlib
import os
from typing import NamedTuple

import numpy as np

# integrate() status codes
OK = 0
STEP_UNDERFLOW = 1
OVERFLOW = 2
TOO_MANY_STEPS = 3


class PackedNetwork(NamedTuple):
    """CSR-style arrays describing a reaction network over indexed species."""

    n_species: int
    rates: np.ndarray  # float64[R]
    rct_ptr: np.ndarray  # int64[R+1]; reactants of r are rct_idx[rct_ptr[r]:rct_ptr[r+1]]
    rct_idx: np.ndarray  # int64
    rct_mult: np.ndarray  # int64
    chg_ptr: np.ndarray  # int64[R+1]; nonzero net changes of r
    chg_idx: np.ndarray  # int64
    chg_val: np.ndarray  # float64


class IntegrationResult(NamedTuple):
    times: np.ndarray
    states: np.ndarray
    status: int
    n_steps: int
    n_rejected: int
    min_raw: float  # most negative value seen before clamping


def load(name: str):
    """Return a kernel module by name: ``"cython"`` or ``"python"``."""
    if name == "cython":
        return importlib.import_module("crnpp._ckernels")
    if name == "python":
        return importlib.import_module("crnpp._pykernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available() -> list[str]:
    names = []
    for name in ("cython", "python"):
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return names


if os.environ.get("CRNPP_PURE_PYTHON"):
    impl = load("python")
    BACKEND = "python"
else:
    try:
        impl = load("cython")
        BACKEND = "cython"
    except ImportError:
        impl = load("python")
        BACKEND = "python"
