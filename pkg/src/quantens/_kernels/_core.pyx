# cython: language_level=3, boundscheck=False, wraparound=False
# cython: cdivision=True, initializedcheck=False
"""Cython implementation of the hot kernels.

Semantics must match ``_python.py`` exactly; the test suite cross-checks the
two backends on random inputs.
"""

from libc.math cimport exp, fabs, log, sqrt, INFINITY

import numpy as np


cdef inline double _eta_cell(double V, double E, double ln_k, double eta_max) noexcept nogil:
    """Range-adaptive learning rate min(1/(2E), sqrt(ln K / V)); capped while
    no regret has been observed (V = 0)."""
    cdef double a, b
    if V <= 0.0:
        return eta_max
    a = INFINITY if E == 0.0 else 1.0 / (2.0 * E)
    b = sqrt(ln_k / V)
    return a if a < b else b


def crps_rows(values, x, probs):
    """Pinball-grid CRPS approximation per row; see the numpy backend."""
    cdef const double[:, :] v = np.asarray(values, dtype=np.float64)
    cdef const double[:] xs = np.asarray(x, dtype=np.float64)
    cdef const double[:] p = probs
    cdef Py_ssize_t n = v.shape[0], m = v.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, g, xi
    out = np.empty(n)
    cdef double[:] o = out
    with nogil:
        for i in range(n):
            acc = 0.0
            xi = xs[i]
            for j in range(m):
                g = (1.0 if xi < v[i, j] else 0.0) - p[j]
                acc += g * (v[i, j] - xi)
            o[i] = 2.0 * acc / m
    return out


def boa_day_update(R, V, E, experts, combined, x, probs, state_rows,
                   double ln_k, double eta_max):
    """One day of regret accumulation, hour by hour, in place; see the
    numpy backend for the array contracts."""
    cdef double[:, :, ::1] R_ = R
    cdef double[:, :, ::1] V_ = V
    cdef double[:, :, ::1] E_ = E
    cdef const double[:, :, :] ex = experts
    cdef const double[:, :] cb = combined
    cdef const double[:] xs = np.asarray(x, dtype=np.float64)
    cdef const double[:] p = probs
    cdef const Py_ssize_t[:] rows = np.asarray(state_rows, dtype=np.intp)
    cdef Py_ssize_t n_hours = cb.shape[0], m = cb.shape[1], k = ex.shape[2]
    cdef Py_ssize_t h, s, i, j
    cdef double g, r, ar, eta
    with nogil:
        for h in range(n_hours):
            s = rows[h]
            for i in range(m):
                g = (1.0 if xs[h] < cb[h, i] else 0.0) - p[i]
                for j in range(k):
                    r = g * (cb[h, i] - ex[h, i, j])
                    ar = fabs(r)
                    if ar > E_[s, i, j]:
                        E_[s, i, j] = ar
                    V_[s, i, j] += r * r
                    eta = _eta_cell(V_[s, i, j], E_[s, i, j], ln_k, eta_max)
                    R_[s, i, j] += r * (1.0 - eta * r)


def weights_from_regret(R, V, E, ln_w0, double ln_k, double eta_max):
    """Normalized weights proportional to w0 * eta * exp(eta * R); uniform
    fallback for rows with no finite log-weight. See the numpy backend."""
    cdef const double[:, :, :] R_ = R
    cdef const double[:, :, :] V_ = V
    cdef const double[:, :, :] E_ = E
    cdef const double[:] lw0 = np.asarray(ln_w0, dtype=np.float64)
    cdef Py_ssize_t ns = R_.shape[0], m = R_.shape[1], k = R_.shape[2]
    cdef Py_ssize_t s, i, j
    cdef double eta, lw, mx, total, uniform
    cdef bint finite
    out = np.empty((ns, m, k))
    cdef double[:, :, ::1] o = out
    uniform = 1.0 / k
    with nogil:
        for s in range(ns):
            for i in range(m):
                mx = -INFINITY
                finite = True
                for j in range(k):
                    eta = _eta_cell(V_[s, i, j], E_[s, i, j], ln_k, eta_max)
                    lw = lw0[j] + log(eta) + eta * R_[s, i, j]
                    o[s, i, j] = lw
                    if lw != lw:  # NaN poisons the row like np.max would
                        finite = False
                    elif lw > mx:
                        mx = lw
                if finite and mx != INFINITY and mx != -INFINITY:
                    total = 0.0
                    for j in range(k):
                        o[s, i, j] = exp(o[s, i, j] - mx)
                        total += o[s, i, j]
                    for j in range(k):
                        o[s, i, j] /= total
                else:
                    for j in range(k):
                        o[s, i, j] = uniform
    return out
