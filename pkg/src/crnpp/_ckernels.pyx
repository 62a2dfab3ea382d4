# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the kernel contract (see crnpp.kernels)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow
from libc.stdlib cimport malloc, realloc, free
from libc.string cimport memcpy

from crnpp.kernels import IntegrationResult

cnp.import_array()

ctypedef long long i64

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176
cdef double A65 = -5103.0 / 18656
cdef double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784
cdef double A76 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40


cdef struct Net:
    i64 n
    i64 n_rx
    const double *rates
    const i64 *rct_ptr
    const i64 *rct_idx
    const i64 *rct_mult
    const i64 *chg_ptr
    const i64 *chg_idx
    const double *chg_val


cdef inline double ipow(double x, i64 m) noexcept nogil:
    if m == 1:
        return x
    if m == 2:
        return x * x
    return pow(x, <double>m)


cdef inline void c_fluxes(const Net *net, const double *y, double *out) noexcept nogil:
    cdef i64 r, j
    cdef double v
    for r in range(net.n_rx):
        v = net.rates[r]
        for j in range(net.rct_ptr[r], net.rct_ptr[r + 1]):
            v *= ipow(y[net.rct_idx[j]], net.rct_mult[j])
        out[r] = v


cdef inline void c_rhs(const Net *net, const double *y, double *dy, double *flux) noexcept nogil:
    cdef i64 i, r, j
    c_fluxes(net, y, flux)
    for i in range(net.n):
        dy[i] = 0.0
    for r in range(net.n_rx):
        for j in range(net.chg_ptr[r], net.chg_ptr[r + 1]):
            dy[net.chg_idx[j]] += net.chg_val[j] * flux[r]


cdef inline double rms_scaled(const double *v, const double *scale, i64 n) noexcept nogil:
    cdef double acc = 0.0, q
    cdef i64 i
    if n == 0:
        return 0.0
    for i in range(n):
        q = v[i] / scale[i]
        acc += q * q
    return sqrt(acc / n)


cdef Net make_net(object net, double[::1] rates, i64[::1] rct_ptr, i64[::1] rct_idx,
                  i64[::1] rct_mult, i64[::1] chg_ptr, i64[::1] chg_idx, double[::1] chg_val):
    cdef Net c
    c.n = net.n_species
    c.n_rx = rates.shape[0]
    c.rates = &rates[0] if rates.shape[0] else NULL
    c.rct_ptr = &rct_ptr[0]
    c.rct_idx = &rct_idx[0] if rct_idx.shape[0] else NULL
    c.rct_mult = &rct_mult[0] if rct_mult.shape[0] else NULL
    c.chg_ptr = &chg_ptr[0]
    c.chg_idx = &chg_idx[0] if chg_idx.shape[0] else NULL
    c.chg_val = &chg_val[0] if chg_val.shape[0] else NULL
    return c


def _arrays(net):
    return (np.ascontiguousarray(net.rates, dtype=np.float64),
            np.ascontiguousarray(net.rct_ptr, dtype=np.int64),
            np.ascontiguousarray(net.rct_idx, dtype=np.int64),
            np.ascontiguousarray(net.rct_mult, dtype=np.int64),
            np.ascontiguousarray(net.chg_ptr, dtype=np.int64),
            np.ascontiguousarray(net.chg_idx, dtype=np.int64),
            np.ascontiguousarray(net.chg_val, dtype=np.float64))


def fluxes(y, net):
    arrs = _arrays(net)
    cdef Net c = make_net(net, arrs[0], arrs[1], arrs[2], arrs[3], arrs[4], arrs[5], arrs[6])
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    out = np.zeros(c.n_rx)
    cdef double[::1] ov = out
    if c.n_rx:
        c_fluxes(&c, &yv[0], &ov[0])
    return out


def rhs(y, net):
    arrs = _arrays(net)
    cdef Net c = make_net(net, arrs[0], arrs[1], arrs[2], arrs[3], arrs[4], arrs[5], arrs[6])
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    out = np.zeros(c.n)
    flux = np.zeros(max(c.n_rx, 1))
    cdef double[::1] ov = out
    cdef double[::1] fv = flux
    if c.n:
        c_rhs(&c, &yv[0], &ov[0], &fv[0])
    return out


cdef double initial_step(const Net *net, double t0, const double *y0, const double *f0,
                         double t1, double rtol, const double *atol, double max_step,
                         double *work, double *scale, double *flux) noexcept nogil:
    cdef i64 i, n = net.n
    cdef double d0, d1, d2, h0, h1, big
    for i in range(n):
        scale[i] = atol[i] + rtol * fabs(y0[i])
    d0 = rms_scaled(y0, scale, n)
    d1 = rms_scaled(f0, scale, n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    if h0 > t1 - t0:
        h0 = t1 - t0
    for i in range(n):
        work[n + i] = y0[i] + h0 * f0[i]
    c_rhs(net, &work[n], work, flux)
    for i in range(n):
        work[i] = work[i] - f0[i]
    d2 = rms_scaled(work, scale, n) / h0
    big = d1 if d1 > d2 else d2
    if big <= 1e-15:
        h1 = h0 * 1e-3
        if h1 < 1e-6:
            h1 = 1e-6
    else:
        h1 = pow(0.01 / big, 0.2)
    if 100 * h0 < h1:
        h1 = 100 * h0
    if max_step < h1:
        h1 = max_step
    if t1 - t0 < h1:
        h1 = t1 - t0
    return h1


def integrate(net, y0, double t0, double t1, double rtol, atol, double max_step,
              double first_step=0.0, long long max_steps=10000000, double overflow=1e12):
    arrs = _arrays(net)
    cdef Net c = make_net(net, arrs[0], arrs[1], arrs[2], arrs[3], arrs[4], arrs[5], arrs[6])
    cdef i64 n = c.n
    y_arr = np.array(y0, dtype=np.float64)
    atol_arr = np.array(np.broadcast_to(np.asarray(atol, dtype=np.float64), (n,)), order="C")
    if t1 <= t0 or n == 0:
        return IntegrationResult(np.array([t0]), y_arr.reshape(1, n).copy(), 0, 0, 0, 0.0)

    cdef double[::1] yv = y_arr
    cdef double[::1] av = atol_arr
    cdef double *y = &yv[0]
    cdef const double *at = &av[0]
    # stage buffers k1..k7, trial state, error, scale, flux, scratch
    work_arr = np.zeros(7 * n + 3 * n + max(c.n_rx, 1) + 2 * n)
    cdef double[::1] wv = work_arr
    cdef double *k1 = &wv[0]
    cdef double *k2 = k1 + n
    cdef double *k3 = k2 + n
    cdef double *k4 = k3 + n
    cdef double *k5 = k4 + n
    cdef double *k6 = k5 + n
    cdef double *k7 = k6 + n
    cdef double *ytmp = k7 + n
    cdef double *err = ytmp + n
    cdef double *scale = err + n
    cdef double *flux = scale + n
    cdef double *scratch = flux + max(c.n_rx, 1)

    cdef i64 cap = 1024, count = 0
    cdef double *tbuf = <double *> malloc(cap * sizeof(double))
    cdef double *ybuf = <double *> malloc(cap * n * sizeof(double))
    if tbuf == NULL or ybuf == NULL:
        free(tbuf)
        free(ybuf)
        raise MemoryError()

    cdef double t = t0, h, err_norm, fac, lowest, highest, a, b, tmp
    cdef int status = 0
    cdef bint last, rejected_last = False, grown_ok = True
    cdef i64 n_steps = 0, n_rejected = 0, i
    cdef double min_raw = 0.0
    cdef double *swap

    with nogil:
        tbuf[0] = t0
        memcpy(ybuf, y, n * sizeof(double))
        count = 1
        c_rhs(&c, y, k1, flux)
        if first_step > 0:
            h = first_step
        else:
            h = initial_step(&c, t0, y, k1, t1, rtol, at, max_step, scratch, scale, flux)
        while t < t1:
            if n_steps >= max_steps:
                status = 3
                break
            tmp = fabs(t)
            if tmp < 1.0:
                tmp = 1.0
            if h < 1e-14 * tmp:
                status = 1
                break
            last = t + h >= t1
            if last:
                h = t1 - t
            for i in range(n):
                ytmp[i] = y[i] + h * A21 * k1[i]
            c_rhs(&c, ytmp, k2, flux)
            for i in range(n):
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            c_rhs(&c, ytmp, k3, flux)
            for i in range(n):
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            c_rhs(&c, ytmp, k4, flux)
            for i in range(n):
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            c_rhs(&c, ytmp, k5, flux)
            for i in range(n):
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                                      + A65 * k5[i])
            c_rhs(&c, ytmp, k6, flux)
            for i in range(n):
                ytmp[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i]
                                      + A76 * k6[i])
            c_rhs(&c, ytmp, k7, flux)
            for i in range(n):
                err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                              + E7 * k7[i])
                a = fabs(y[i])
                b = fabs(ytmp[i])
                scale[i] = at[i] + rtol * (a if a > b else b)
            err_norm = rms_scaled(err, scale, n)
            if err_norm <= 1.0:
                if last:
                    t = t1
                else:
                    t = t + h
                n_steps += 1
                lowest = 0.0
                highest = 0.0
                for i in range(n):
                    if ytmp[i] < lowest:
                        lowest = ytmp[i]
                    if ytmp[i] > highest:
                        highest = ytmp[i]
                memcpy(y, ytmp, n * sizeof(double))
                if lowest < 0:
                    if lowest < min_raw:
                        min_raw = lowest
                    for i in range(n):
                        if y[i] < 0:
                            y[i] = 0.0
                    c_rhs(&c, y, k1, flux)
                else:
                    memcpy(k1, k7, n * sizeof(double))
                if count == cap:
                    cap *= 2
                    swap = <double *> realloc(tbuf, cap * sizeof(double))
                    if swap == NULL:
                        grown_ok = False
                        break
                    tbuf = swap
                    swap = <double *> realloc(ybuf, cap * n * sizeof(double))
                    if swap == NULL:
                        grown_ok = False
                        break
                    ybuf = swap
                tbuf[count] = t
                memcpy(ybuf + count * n, y, n * sizeof(double))
                count += 1
                if highest > overflow:
                    status = 2
                    break
                fac = 1.0 if rejected_last else 10.0
                if err_norm > 0:
                    tmp = 0.9 * pow(err_norm, -0.2)
                    if tmp < 0.2:
                        tmp = 0.2
                    if tmp < fac:
                        fac = tmp
                h = h * fac
                if h > max_step:
                    h = max_step
                rejected_last = False
            else:
                n_rejected += 1
                rejected_last = True
                tmp = 0.9 * pow(err_norm, -0.2)
                if tmp < 0.2:
                    tmp = 0.2
                h = h * tmp

    if not grown_ok:
        free(tbuf)
        free(ybuf)
        raise MemoryError()
    times = np.empty(count)
    states = np.empty((count, n))
    cdef double[::1] tv = times
    cdef double[:, ::1] sv = states
    memcpy(&tv[0], tbuf, count * sizeof(double))
    memcpy(&sv[0, 0], ybuf, count * n * sizeof(double))
    free(tbuf)
    free(ybuf)
    return IntegrationResult(times, states, status, n_steps, n_rejected, min_raw)
