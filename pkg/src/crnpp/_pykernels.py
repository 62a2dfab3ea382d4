"""Pure numpy implementation of the kernel contract (see :mod:`crnpp.kernels`)."""

from __future__ import annotations

import math

import numpy as np

from crnpp.kernels import OK, OVERFLOW, STEP_UNDERFLOW, TOO_MANY_STEPS, IntegrationResult

# Dormand-Prince 5(4) tableau
C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


class _Dense:
    """Padded reactant matrix and dense stoichiometry, built once per network."""

    def __init__(self, net):
        n_rx = len(net.rates)
        counts = np.diff(net.rct_ptr)
        width = max(1, int(counts.max()) if n_rx else 1)
        self.idx = np.zeros((n_rx, width), dtype=np.int64)
        self.mult = np.zeros((n_rx, width), dtype=np.float64)
        for r in range(n_rx):
            lo, hi = net.rct_ptr[r], net.rct_ptr[r + 1]
            self.idx[r, : hi - lo] = net.rct_idx[lo:hi]
            self.mult[r, : hi - lo] = net.rct_mult[lo:hi]
        self.stoich = np.zeros((net.n_species, n_rx))
        for r in range(n_rx):
            lo, hi = net.chg_ptr[r], net.chg_ptr[r + 1]
            self.stoich[net.chg_idx[lo:hi], r] = net.chg_val[lo:hi]
        self.rates = np.asarray(net.rates, dtype=np.float64)

    def fluxes(self, y):
        if not len(self.rates):
            return np.zeros(0)
        return self.rates * np.prod(y[self.idx] ** self.mult, axis=1)

    def rhs(self, y):
        if not len(self.rates):
            return np.zeros_like(y)
        return self.stoich @ self.fluxes(y)


def fluxes(y, net):
    return _Dense(net).fluxes(np.asarray(y, dtype=np.float64))


def rhs(y, net):
    return _Dense(net).rhs(np.asarray(y, dtype=np.float64))


def _rms(v):
    return math.sqrt(float(np.mean(v * v))) if v.size else 0.0


def _initial_step(f, t0, y0, f0, t1, rtol, atol, max_step):
    scale = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t1 - t0)
    f1 = f(y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step, t1 - t0)


def integrate(net, y0, t0, t1, rtol, atol, max_step, first_step=0.0, max_steps=10_000_000,
              overflow=1e12):
    dense = _Dense(net)
    f = dense.rhs
    y = np.array(y0, dtype=np.float64)
    atol = np.broadcast_to(np.asarray(atol, dtype=np.float64), y.shape).copy()
    n = y.size
    times = [t0]
    states = [y.copy()]
    if t1 <= t0 or n == 0:
        return IntegrationResult(np.array(times), np.array(states).reshape(len(times), n), OK,
                                 0, 0, 0.0)

    t = t0
    k = [None] * 7
    k[0] = f(y)
    h = first_step if first_step > 0 else _initial_step(f, t0, y, k[0], t1, rtol, atol, max_step)
    status = OK
    n_steps = n_rejected = 0
    min_raw = 0.0
    rejected_last = False
    while t < t1:
        if n_steps >= max_steps:
            status = TOO_MANY_STEPS
            break
        if h < 1e-14 * max(abs(t), 1.0):
            status = STEP_UNDERFLOW
            break
        last = t + h >= t1
        if last:
            h = t1 - t
        for s in range(1, 7):
            acc = y.copy()
            for j, a in enumerate(A[s]):
                if a:
                    acc += h * a * k[j]
            k[s] = f(acc)
        y_new = acc  # stage 7 argument is the 5th order solution
        err = np.zeros(n)
        for j, e in enumerate(E):
            if e:
                err += e * k[j]
        err *= h
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _rms(err / scale)
        if err_norm <= 1.0:
            t = t1 if last else t + h
            n_steps += 1
            lowest = float(y_new.min())
            if lowest < 0:
                min_raw = min(min_raw, lowest)
                np.maximum(y_new, 0.0, out=y_new)
                k[0] = f(y_new)
            else:
                k[0] = k[6]
            y = y_new
            times.append(t)
            states.append(y.copy())
            if float(y.max()) > overflow:
                status = OVERFLOW
                break
            fac = 10.0 if not rejected_last else 1.0
            if err_norm > 0:
                fac = min(fac, max(0.2, 0.9 * err_norm ** -0.2))
            h = min(h * fac, max_step)
            rejected_last = False
        else:
            n_rejected += 1
            rejected_last = True
            h = h * max(0.2, 0.9 * err_norm ** -0.2)
    return IntegrationResult(np.array(times), np.array(states), status, n_steps, n_rejected,
                             min_raw)
