"""Dual-feasible output laws on the non-negative integers.

Every family has the form Pr[Y=y] = y0 * w(y) with w(0) = 1, so y0 is both
the normalizer and the mass at zero. Weights are handled in log-space.
"""

import enum
import math
import threading
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .integrals import DEFAULT_QUAD, cal_e, lambda_trunc
from .specfun import binary_entropy, eta, log_binomial_real, log_integral
from .tolerances import DEFAULT, Tolerances

MAX_TERMS = 20_000_000
Q_CAP = 1.0 - 1e-6


class DistKind(str, enum.Enum):
    POILOG = "PoiLog"
    POIDIGAMMA = "PoiDigamma"
    INVBIN = "InvBin"
    BINTRUNC = "BinTrunc"
    NEGBIN = "NegBin"
    GEOMETRIC = "Geometric"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        for k in cls:
            if k.value.lower() == str(name).lower() or k.name.lower() == str(name).lower():
                return k
        raise ValueError(f"unknown distribution kind {name!r}")


NEEDS_P = {DistKind.INVBIN, DistKind.BINTRUNC}


def _check_params(kind, p, q, r):
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if kind in NEEDS_P and (p is None or not 0.0 < p <= 1.0):
        raise ValueError(f"{kind.value} requires p in (0, 1], got {p}")
    if kind is DistKind.NEGBIN and (r is None or not r > 0):
        raise ValueError("NegBin requires an order r > 0")


# -- truncated binomial exponent --

def _g_constants(p):
    if p >= 0.5:
        return -log_integral(1.0 - p) / p, eta(1.0 - p)
    z = (1.0 - 2.0 * p) / (1.0 - p)
    lin = ((1.0 - p) * log_integral(z) - log_integral(1.0 - p)) / p
    return lin, eta(1.0 - p) - eta(z)


def g_trunc(p, y, cfg=DEFAULT_QUAD):
    """Exponent g(y) of the truncated binomial law, with g(0) = 0."""
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError("g_trunc requires p in (0, 1]")
    if y < 0 or y != int(y):
        raise ValueError("g_trunc requires a non-negative integer y")
    if y == 0:
        return 0.0
    lin, const = _g_constants(p)
    return _g_value(p, float(y), lin, const, cfg)


def _g_value(p, y, lin, const, cfg):
    head = lambda_trunc(p, y, cfg)
    if p >= 0.5:
        other = cal_e(1.0 / p - 1.0, y, cfg) if p < 1.0 else 0.0
    else:
        other = lambda_trunc(p / (1.0 - p), y, cfg)
    return head - other + y * lin + const


class _GTable:
    """Growing table of g(0), g(1), ... for one p."""

    def __init__(self, p, cfg):
        self.p = p
        self.cfg = cfg
        self.lin, self.const = _g_constants(p)
        self.values = np.zeros(1)
        self.lock = threading.Lock()

    def upto(self, n):
        with self.lock:
            have = self.values.shape[0]
            if n > have:
                new = np.array([_g_value(self.p, float(y), self.lin, self.const, self.cfg)
                                for y in range(have, n)])
                self.values = np.concatenate([self.values, new])
            return self.values[:n]


_G_TABLES = {}
_G_LOCK = threading.Lock()


def g_table(p, n, cfg=DEFAULT_QUAD):
    """g(y) for y = 0, ..., n-1, cached per (p, cfg)."""
    key = (float(p), cfg)
    with _G_LOCK:
        tab = _G_TABLES.get(key)
        if tab is None:
            if len(_G_TABLES) > 128:
                _G_TABLES.clear()
            tab = _G_TABLES[key] = _GTable(float(p), cfg)
    return tab.upto(n)


def log_weight(kind, p, q, y, r=None, cfg=DEFAULT_QUAD):
    """log w(y) for an integer array ``y`` starting anywhere >= 0."""
    y = np.asarray(y, dtype=float)
    lq = math.log(q)
    if kind is DistKind.POILOG:
        return special.xlogy(y, y) - special.gammaln(y + 1.0) + y * (lq - 1.0)
    if kind is DistKind.POIDIGAMMA:
        ys = np.where(y > 0, y, 1.0)
        out = ys * special.psi(ys) - special.gammaln(y + 1.0) + y * (lq - 1.0)
        return np.where(y > 0, out, 0.0)
    if kind is DistKind.INVBIN:
        return log_binomial_real(y / p, y) + y * (lq - binary_entropy(p) / p)
    if kind is DistKind.BINTRUNC:
        hi = int(y.max()) + 1 if y.size else 0
        g = g_table(p, hi, cfg)[y.astype(np.int64)]
        return g - special.gammaln(y + 1.0) + y * (lq - binary_entropy(p) / p)
    if kind is DistKind.NEGBIN:
        return special.gammaln(y + r) - special.gammaln(r) - special.gammaln(y + 1.0) + y * lq
    if kind is DistKind.GEOMETRIC:
        return y * lq
    raise ValueError(f"unsupported kind {kind}")


@dataclass(frozen=True)
class DualDistribution:
    """A normalized candidate output law with cached y0 and mean."""

    kind: DistKind
    p: float | None
    q: float
    y0: float
    mu: float
    tail_tol: float
    r: float | None = None
    n_terms: int = 0
    cfg: object = field(default=DEFAULT_QUAD, repr=False, compare=False)

    @property
    def ell(self):
        """-log y0."""
        return -math.log(self.y0)

    def log_pmf(self, y):
        y = np.asarray(y)
        if np.any(y < 0):
            raise ValueError("log_pmf requires y >= 0")
        out = math.log(self.y0) + log_weight(self.kind, self.p, self.q, y, self.r, self.cfg)
        return float(out) if np.ndim(out) == 0 else out

    def pmf(self, y):
        return np.exp(self.log_pmf(y))


def log_pmf(dist, y):
    """Natural log of Pr[Y = y] under ``dist``."""
    return dist.log_pmf(y)


def _quad_cfg(tol, cfg):
    if cfg is not None:
        return cfg
    if isinstance(tol, Tolerances) and tol.quad_abs != DEFAULT_QUAD.abs_tol:
        return replace(DEFAULT_QUAD, abs_tol=tol.quad_abs)
    return DEFAULT_QUAD


def normalize(kind, p=None, q=0.5, tol=DEFAULT, r=None, cfg=None):
    """Sum the weight series to obtain y0 and the mean.

    Summation proceeds in doubling blocks and stops once twice the geometric
    majorant of both remaining tails (mass and first moment) falls below
    ``tol.tail_rel`` times the partial sums. Without an explicit ``cfg`` the
    quadrature tolerance is taken from ``tol.quad_abs``.
    """
    kind = DistKind.parse(kind)
    cfg = _quad_cfg(tol, cfg)
    if q >= 1.0:
        raise ValueError("the weight series diverges for q >= 1")
    _check_params(kind, p, q, r)
    if q > Q_CAP:
        raise RuntimeError(f"q = {q} exceeds the iteration cap 1 - 1e-6; "
                           f"expected ~{-30 / math.log(q):.3g} terms")
    p = None if kind not in NEEDS_P else float(p)
    tail_rel = tol.tail_rel if isinstance(tol, Tolerances) else float(tol)
    n = 256
    start = 0
    blocks = []
    while True:
        ys = np.arange(start, n)
        blocks.append(log_weight(kind, p, q, ys, r, cfg))
        lw = np.concatenate(blocks) if len(blocks) > 1 else blocks[0]
        top = lw.max()
        w = np.exp(lw - top)
        yy = np.arange(n, dtype=float)
        s0 = math.fsum(w)
        s1 = math.fsum(yy * w)
        last = n - 1
        rho = max(math.exp(lw[last] - lw[last - 1]), q)
        tail0 = tail1 = math.inf
        if rho < 1.0:
            tail0 = 2.0 * w[last] * rho / (1.0 - rho)
            rho1 = rho * (last + 1.0) / last
            if rho1 < 1.0:
                tail1 = 2.0 * last * w[last] * rho1 / (1.0 - rho1)
        if tail0 <= tail_rel * s0 and tail1 <= tail_rel * s1:
            break
        if n >= MAX_TERMS:
            raise RuntimeError(f"normalization did not converge in {n} terms "
                               f"(kind={kind.value}, p={p}, q={q})")
        blocks = [lw]
        start = n
        n *= 2
    y0 = math.exp(-top) / s0
    mu = s1 / s0
    achieved = max(tail0 / s0, tail1 / s1 if s1 > 0 else 0.0)
    return DualDistribution(kind, p, float(q), y0, mu, achieved, r, n, cfg)


def lambda_p_exact(p, y, cfg=DEFAULT_QUAD):
    """y h(p)/p + log y! - E_{1/p}(y) + E_{1/p - 1}(y) for integer y <= 30."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError("lambda_p_exact requires p in (0, 1)")
    if y < 0 or y != int(y) or y > 30:
        raise ValueError("lambda_p_exact requires an integer 0 <= y <= 30")
    y = int(y)
    if y == 0:
        return 0.0
    return (y * binary_entropy(p) / p + math.lgamma(y + 1.0)
            - cal_e(1.0 / p, y, cfg) + cal_e(1.0 / p - 1.0, y, cfg))
