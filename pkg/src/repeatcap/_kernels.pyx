# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Mirrors ``_pykernels`` exactly."""

import sys

import numpy as np
from scipy import LowLevelCallable

from libc.math cimport exp, expm1, log, log1p, pow, ceil, fabs, INFINITY

cdef double SERIES_SWITCH = 0.05

cdef enum:
    MAX_RUNS = 64


cdef inline double _one_minus_lin_minus_pow(double u, double y) noexcept nogil:
    cdef double term, total
    cdef int k
    if y == 0.0:
        return 0.0
    if u * (y if y > 1.0 else 1.0) < SERIES_SWITCH:
        term = -0.5 * y * (y - 1.0) * u * u
        total = 0.0
        k = 2
        while term != 0.0:
            total += term
            if fabs(term) <= 1e-17 * fabs(total):
                break
            term *= -(y - k) * u / (k + 1)
            k += 1
        return total
    if u >= 1.0:
        return 1.0 - y
    return -expm1(y * log1p(-u)) - u * y


cdef api double trunc_integrand(int n, double *xx) noexcept nogil:
    cdef double t = xx[0], a = xx[1], y = xx[2], b = xx[3]
    if t < 1e-150:
        # t log(1 - b t) underflows; the limit is exact to O(a t y)
        return 0.5 * y * (y - 1.0) * a * a / b
    if b * t >= 1.0:
        return 0.0
    return _one_minus_lin_minus_pow(a * t, y) / (t * log1p(-b * t))


cdef api double pow_integrand(int n, double *xx) noexcept nogil:
    cdef double t = xx[0], c = xx[1], x = xx[2], s = xx[3]
    if t >= 1.0:
        return 0.0
    return (pow(1.0 - c * t, x) - s) / (t * log1p(-t))


cdef api double eta_remainder(int n, double *xx) noexcept nogil:
    cdef double s = xx[0], s2
    if s < 0.1:
        s2 = s * s
        return (1.0 / 12.0 - s2 / 720.0 + s2 * s2 / 30240.0
                - s2 * s2 * s2 / 1209600.0)
    return 1.0 / (s * expm1(s)) - 1.0 / (s * s) + 0.5 / s


cdef api double eta_tail(int n, double *xx) noexcept nogil:
    cdef double s = xx[0]
    if s > 700.0:
        return 0.0
    return 1.0 / (s * expm1(s))


_mod = sys.modules[__name__]
TRUNC_INTEGRAND = LowLevelCallable.from_cython(_mod, "trunc_integrand")
POW_INTEGRAND = LowLevelCallable.from_cython(_mod, "pow_integrand")
ETA_REMAINDER = LowLevelCallable.from_cython(_mod, "eta_remainder")
ETA_TAIL = LowLevelCallable.from_cython(_mod, "eta_tail")


def lerch_series(double z, double s, double a, double rel_tol, long max_terms):
    """Partial sum of sum_k z^k (k+a)^(-s) with a geometric tail bound."""
    cdef double total = 0.0, zk = 1.0, tail = INFINITY, term, r
    cdef double grow = -s if s < 0.0 else 0.0
    cdef long k = 0
    while k < max_terms:
        term = zk * pow(k + a, -s)
        total += term
        r = z * pow((k + 1.0 + a) / (k + a), grow)
        if r < 1.0:
            tail = term * r / (1.0 - r)
            if tail <= rel_tol * fabs(total):
                return total, tail, k + 1
        zk *= z
        k += 1
    return total, tail, k


cdef inline long _draw(int kind, double par, double u) noexcept nogil:
    cdef double pmf, cdf
    cdef long k
    if kind == 0:
        return 1 if u < par else 0
    pmf = exp(-par)
    cdf = pmf
    k = 0
    while u > cdf and k < 10000:
        k += 1
        pmf *= par / k
        cdf += pmf
    return k


cdef inline long _draw_bar(int kind, double par, double u) noexcept nogil:
    cdef double d
    cdef long k
    if kind == 0:
        return 1
    d = exp(-par)
    k = _draw(kind, par, d + u * (1.0 - d))
    return k if k > 1 else 1


cdef inline long _geometric(double p, double u) noexcept nogil:
    cdef long g
    if p >= 1.0:
        return 1
    g = <long>ceil(log(u) / log1p(-p))
    return g if g > 1 else 1


def direct_runs(bits, int kind, double par, double[:, ::1] u, int k, long clip):
    """First ``k`` output run lengths of the repeat channel for each trial."""
    cdef long[::1] b = np.ascontiguousarray(bits, dtype=np.int64)
    cdef Py_ssize_t n = b.shape[0], trials = u.shape[0], tr, i, j
    out_arr = np.zeros((trials, k), dtype=np.int64)
    cdef long[:, ::1] out = out_arr
    cdef long lens[MAX_RUNS]
    cdef long vals[MAX_RUNS]
    cdef int nr
    cdef long c
    if k >= MAX_RUNS:
        raise ValueError("k too large")
    with nogil:
        for tr in range(trials):
            nr = 0
            for i in range(n):
                if i == 0:
                    c = _draw_bar(kind, par, u[tr, 0])
                else:
                    c = _draw(kind, par, u[tr, i])
                if c > 0:
                    if nr > 0 and vals[nr - 1] == b[i]:
                        lens[nr - 1] += c
                    else:
                        vals[nr] = b[i]
                        lens[nr] = c
                        nr += 1
                if nr > k:
                    break
            for j in range(k if nr > k else nr):
                out[tr, j] = lens[j] if lens[j] <= clip else clip + 1
    return out_arr


def composed_runs(bits, int kind, double par, double geo_p,
                  double[:, ::1] u, int k, long clip):
    """First ``k`` outputs of the pre-processor followed by the run-processor."""
    cdef long[::1] b = np.ascontiguousarray(bits, dtype=np.int64)
    cdef Py_ssize_t n = b.shape[0], trials = u.shape[0], tr, i, ui, start
    out_arr = np.zeros((trials, k), dtype=np.int64)
    cdef long[:, ::1] out = out_arr
    cdef long g, z, seen, y, ref, j
    cdef int m, found
    with nogil:
        for tr in range(trials):
            ui = 0
            start = 0
            m = 0
            while start < n and m < k:
                g = _geometric(geo_p, u[tr, ui])
                ui += 1
                ref = b[start]
                seen = 0
                z = 0
                i = start
                found = 0
                while i < n:
                    if b[i] != ref:
                        seen += 1
                        if seen == g:
                            found = 1
                            break
                    else:
                        z += 1
                    i += 1
                y = _draw_bar(kind, par, u[tr, ui])
                ui += 1
                for j in range(z - 1):
                    y += _draw(kind, par, u[tr, ui])
                    ui += 1
                out[tr, m] = y if y <= clip else clip + 1
                m += 1
                if not found:
                    break
                start = i
    return out_arr
