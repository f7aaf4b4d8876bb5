"""Pure-Python kernels. Same API and semantics as the compiled ``_kernels``."""

import math

import numpy as np

SERIES_SWITCH = 0.05


def _one_minus_lin_minus_pow(u, y):
    # 1 - u*y - (1-u)^y without cancellation for small u*y
    if y == 0.0:
        return 0.0
    if u * max(y, 1.0) < SERIES_SWITCH:
        term = -0.5 * y * (y - 1.0) * u * u
        total = 0.0
        k = 2
        while term != 0.0:
            total += term
            if abs(term) <= 1e-17 * abs(total):
                break
            term *= -(y - k) * u / (k + 1)
            k += 1
        return total
    if u >= 1.0:
        return 1.0 - y
    return -math.expm1(y * math.log1p(-u)) - u * y


def trunc_integrand(t, a, y, b):
    """(1 - a t y - (1 - a t)^y) / (t log(1 - b t))."""
    if t < 1e-150:
        # t log(1 - b t) underflows; the limit is exact to O(a t y)
        return 0.5 * y * (y - 1.0) * a * a / b
    if b * t >= 1.0:
        return 0.0
    return _one_minus_lin_minus_pow(a * t, y) / (t * math.log1p(-b * t))


def pow_integrand(t, c, x, s):
    """((1 - c t)^x - s) / (t log(1 - t)) on t in (0, 1)."""
    if t >= 1.0:
        return 0.0
    return ((1.0 - c * t) ** x - s) / (t * math.log1p(-t))


def eta_remainder(s):
    """1/(s(e^s - 1)) - 1/s^2 + 1/(2s), smooth at s = 0."""
    if s < 0.1:
        s2 = s * s
        return (1.0 / 12.0 - s2 / 720.0 + s2 * s2 / 30240.0
                - s2 * s2 * s2 / 1209600.0)
    return 1.0 / (s * math.expm1(s)) - 1.0 / (s * s) + 0.5 / s


def eta_tail(s):
    """1/(s(e^s - 1))."""
    if s > 700.0:
        return 0.0
    return 1.0 / (s * math.expm1(s))


TRUNC_INTEGRAND = trunc_integrand
POW_INTEGRAND = pow_integrand
ETA_REMAINDER = eta_remainder
ETA_TAIL = eta_tail


def lerch_series(z, s, a, rel_tol, max_terms):
    """Partial sum of sum_k z^k (k+a)^(-s) with a geometric tail bound.

    Returns ``(value, tail_bound, n_terms)``.
    """
    total = 0.0
    zk = 1.0
    tail = math.inf
    grow = max(-s, 0.0)
    k = 0
    while k < max_terms:
        term = zk * (k + a) ** (-s)
        total += term
        r = z * ((k + 1.0 + a) / (k + a)) ** grow
        if r < 1.0:
            tail = term * r / (1.0 - r)
            if tail <= rel_tol * abs(total):
                return total, tail, k + 1
        zk *= z
        k += 1
    return total, tail, k


# -- repetition draws from a single uniform in (0, 1] --

def _draw(kind, par, u):
    if kind == 0:
        return 1 if u < par else 0
    pmf = math.exp(-par)
    cdf = pmf
    k = 0
    while u > cdf and k < 10000:
        k += 1
        pmf *= par / k
        cdf += pmf
    return k


def _draw_bar(kind, par, u):
    if kind == 0:
        return 1
    d = math.exp(-par)
    return max(_draw(kind, par, d + u * (1.0 - d)), 1)


def _geometric(p, u):
    if p >= 1.0:
        return 1
    return max(1, int(math.ceil(math.log(u) / math.log1p(-p))))


def _push(runs, bit, count):
    if count <= 0:
        return
    if runs and runs[-1][0] == bit:
        runs[-1][1] += count
    else:
        runs.append([bit, count])


def direct_runs(bits, kind, par, u, k, clip):
    """First ``k`` output run lengths of the repeat channel for each trial.

    ``u`` has shape (trials, m) with m >= len(bits); row i feeds trial i.
    Missing runs are 0; runs above ``clip`` are reported as ``clip + 1``.
    """
    bits = np.asarray(bits)
    n = bits.shape[0]
    trials = u.shape[0]
    out = np.zeros((trials, k), dtype=np.int64)
    for tr in range(trials):
        row = u[tr]
        runs = []
        _push(runs, bits[0], _draw_bar(kind, par, row[0]))
        for i in range(1, n):
            _push(runs, bits[i], _draw(kind, par, row[i]))
            if len(runs) > k:
                break
        for j in range(min(k, len(runs))):
            out[tr, j] = min(runs[j][1], clip + 1)
    return out


def composed_runs(bits, kind, par, geo_p, u, k, clip):
    """First ``k`` outputs of the pre-processor followed by the run-processor.

    ``geo_p`` is the success probability of the geometric draw; the faithful
    pipeline uses the channel's retention probability. ``u`` has shape
    (trials, m) with m >= 2 * len(bits).
    """
    bits = np.asarray(bits)
    n = bits.shape[0]
    trials = u.shape[0]
    out = np.zeros((trials, k), dtype=np.int64)
    for tr in range(trials):
        row = u[tr]
        ui = 0
        start = 0
        m = 0
        while start < n and m < k:
            g = _geometric(geo_p, row[ui])
            ui += 1
            ref = bits[start]
            seen = 0
            z = 0
            i = start
            found = False
            while i < n:
                if bits[i] != ref:
                    seen += 1
                    if seen == g:
                        found = True
                        break
                else:
                    z += 1
                i += 1
            y = _draw_bar(kind, par, row[ui])
            ui += 1
            for _ in range(z - 1):
                y += _draw(kind, par, row[ui])
                ui += 1
            out[tr, m] = min(y, clip + 1)
            m += 1
            if not found:
                break
            start = i
    return out

