"""Capacity-bound objectives, their maximization over q, and analytic estimates.

Internal unit is nats; bits appear only in ``BoundResult``. For a deletion
channel with retention p = 1 - d the bound is (1 - d) * sup_q s(q) with the
slope s(q) = (-mu log q - log y0) / (1 + mu). For the Poisson-repeat channel
with d = exp(-lambda) it is sup_q (-mu log q - log y0) / (mu / lambda + 1/(1-d)).
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dists import DistKind, normalize
from .specfun import EULER_GAMMA, binary_entropy, lerch_phi
from .tolerances import DEFAULT

LOG2 = math.log(2.0)
PHI = (1.0 + math.sqrt(5.0)) / 2.0
GOLDEN_CONJ = (math.sqrt(5.0) - 1.0) / 2.0
INVPHI = GOLDEN_CONJ


class FlatObjectiveWarning(RuntimeWarning):
    pass


class MultimodalWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class EstimateConstants:
    """Constants of the analytic sandwich estimates (overridable)."""

    sigma_lo: float = 1.0 / 6.0
    sigma_hi: float = 0.177
    gamma_lo: float = 2.0 / math.exp(1.0 + EULER_GAMMA)
    gamma_hi: float = 1.0 / math.sqrt(2.0 * math.e)
    alpha_lo: float = 0.19
    alpha_hi: float = 0.12

    @staticmethod
    def beta0(p):
        """(2/p) exp(-h(p)/p); tends to 2/e as p -> 0."""
        if p == 0.0:
            return 2.0 / math.e
        return (2.0 / p) * math.exp(-binary_entropy(p) / p)

    @staticmethod
    def beta1(p):
        return 1.0 / math.sqrt(2.0 * (1.0 - p))


CONSTANTS = EstimateConstants()


@dataclass(frozen=True)
class BoundResult:
    """A capacity upper bound together with its slope c = bound / (1 - d)."""

    value_nats: float
    q_star: float
    method: str
    d: float
    tol: float
    slope_nats: float
    conditional: bool = False

    @property
    def value_bits(self):
        return self.value_nats / LOG2

    @property
    def slope_bits(self):
        return self.slope_nats / LOG2


@dataclass(frozen=True)
class Bracket:
    """Lower and upper estimates of ell = -log y0 and of the mean."""

    ell_lo: float
    ell_hi: float
    mu_lo: float
    mu_hi: float

    def composite(self, q):
        """Upper bound on -mu log q - log y0."""
        return -self.mu_hi * math.log(q) + self.ell_hi

    def contains(self, ell, mu, rtol=1e-12):
        slack_e = rtol * max(1.0, abs(ell))
        slack_m = rtol * max(1.0, abs(mu))
        return (self.ell_lo - slack_e <= ell <= self.ell_hi + slack_e
                and self.mu_lo - slack_m <= mu <= self.mu_hi + slack_m)

    @property
    def width(self):
        return max(self.ell_hi - self.ell_lo, self.mu_hi - self.mu_lo)


# -- basic objectives --

def mean_limited_bound(dist):
    """-mu log q - log y0: capacity of the mean-limited channel at mean mu."""
    return -dist.mu * math.log(dist.q) - math.log(dist.y0)


def deletion_slope(dist):
    return mean_limited_bound(dist) / (1.0 + dist.mu)


def c_ber(p, q, kind=DistKind.INVBIN, tol=DEFAULT):
    """p * (-mu log q - log y0) / (1 + mu) in nats."""
    kind = DistKind.parse(kind)
    if kind not in (DistKind.INVBIN, DistKind.BINTRUNC):
        raise ValueError("c_ber is defined for InvBin and BinTrunc")
    return p * deletion_slope(normalize(kind, p, q, tol))


def maximize_unimodal(f, tol_q=1e-8, lo=0.01, hi=0.99, n_grid=64):
    """Grid scan followed by golden-section refinement around the best point."""
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([f(q) for q in grid])
    if not np.all(np.isfinite(vals)):
        raise ValueError("objective is not finite on the scan grid")
    if vals.max() - vals.min() < 1e-12:
        warnings.warn("objective is flat on the scan grid", FlatObjectiveWarning,
                      stacklevel=2)
    interior = (vals[1:-1] > vals[:-2]) & (vals[1:-1] >= vals[2:])
    if interior.sum() > 1:
        warnings.warn("objective has several local maxima on the scan grid",
                      MultimodalWarning, stacklevel=2)
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n_grid - 1)]
    best_q, best_f = float(grid[i]), float(vals[i])
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol_q:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    for q, v in ((c, fc), (d, fd)):
        if v > best_f:
            best_q, best_f = float(q), float(v)
    return best_q, best_f


# -- analytic estimates --

def _negbin_bracket(q, lo, hi):
    s = math.sqrt(1.0 - q)
    base = 1.0 / s - 1.0
    return Bracket(
        ell_lo=math.log1p(lo * base),
        ell_hi=math.log1p(hi * base),
        mu_lo=lo * q / (2.0 * (1.0 - q) * (s + hi * (1.0 - s))),
        mu_hi=hi * q / (2.0 * (1.0 - q) * (s + lo * (1.0 - s))),
    )


def poilog_lerch_bracket(q, c=CONSTANTS):
    """Lerch-transcendent brackets for the PoiLog law."""
    scale = q / math.sqrt(2.0 * math.pi)

    def s0(sig):
        return scale * lerch_phi(q, 0.5, 1.0 + sig)

    def s1(sig):
        return scale * lerch_phi(q, -0.5, 1.0 + sig) - sig * s0(sig)

    lo0, hi0 = s0(c.sigma_hi), s0(c.sigma_lo)
    return Bracket(
        ell_lo=math.log1p(lo0),
        ell_hi=math.log1p(hi0),
        mu_lo=s1(c.sigma_hi) / (1.0 + hi0),
        mu_hi=s1(c.sigma_lo) / (1.0 + lo0),
    )


def poidigamma_elementary_bracket(q, c=CONSTANTS):
    """Negative-binomial style brackets for the digamma law."""
    return _negbin_bracket(q, c.gamma_lo, c.gamma_hi)


@dataclass(frozen=True)
class PoissonEstimates:
    q: float
    lerch: Bracket
    elementary: Bracket

    @property
    def lerch_bound(self):
        return self.lerch.composite(self.q)

    @property
    def elementary_bound(self):
        return self.elementary.composite(self.q)


def poisson_estimates(q, c=CONSTANTS):
    return PoissonEstimates(q, poilog_lerch_bracket(q, c), poidigamma_elementary_bracket(q, c))


def invbin_elementary_bracket(p, q, c=CONSTANTS):
    b0, b1 = c.beta0(p), c.beta1(p)
    return _negbin_bracket(q, min(b0, b1), max(b0, b1))


def invbin_lerch_bracket(p, q, c=CONSTANTS):
    """Lerch brackets for the inverse binomial law; p = 0 gives the limit law."""
    scale = 1.0 / math.sqrt(2.0 * math.pi * (1.0 - p))

    def parts(alpha):
        a = 1.0 + alpha / (1.0 - p)
        half = q * scale * lerch_phi(q, 0.5, a)
        s0 = 1.0 + half
        s1 = q * scale * lerch_phi(q, -0.5, a) - alpha * half / (1.0 - p)
        return s0, s1

    s0_lo, s1_lo = parts(c.alpha_lo)
    s0_hi, s1_hi = parts(c.alpha_hi)
    return Bracket(
        ell_lo=math.log(s0_lo),
        ell_hi=math.log(s0_hi),
        mu_lo=s1_lo / s0_hi,
        mu_hi=s1_hi / s0_lo,
    )


@dataclass(frozen=True)
class InvBinEstimates:
    p: float
    q: float
    elementary: Bracket
    lerch: Bracket


def invbin_estimates(p, q, c=CONSTANTS):
    return InvBinEstimates(p, q, invbin_elementary_bracket(p, q, c), invbin_lerch_bracket(p, q, c))


# -- method dispatch --

DELETION_METHODS = ("BinTrunc", "InvBin", "lerch", "elementary")
POISSON_METHODS = ("PoiDigamma", "elementary", "PoiLog", "lerch")


def _method_name(method):
    if isinstance(method, DistKind):
        return method.value
    for name in DELETION_METHODS + POISSON_METHODS:
        if str(method).lower() == name.lower():
            return name
    raise ValueError(f"unknown method {method!r}")


def _deletion_terms(method, p, tol, c):
    """Map q to (upper bound on -mu log q - log y0, lower bound on mu)."""
    method = _method_name(method)
    if method in ("BinTrunc", "InvBin"):
        kind = DistKind.parse(method)

        def terms(q):
            dist = normalize(kind, p, q, tol)
            return mean_limited_bound(dist), dist.mu
    elif method == "lerch":
        def terms(q):
            br = invbin_lerch_bracket(p, q, c)
            return br.composite(q), br.mu_lo
    elif method == "elementary":
        def terms(q):
            br = invbin_elementary_bracket(p, q, c)
            return br.composite(q), br.mu_lo
    else:
        raise ValueError(f"unknown deletion method {method!r}")
    return terms


def _poisson_terms(method, tol, c):
    method = _method_name(method)
    if method in ("PoiDigamma", "PoiLog"):
        kind = DistKind.parse(method)

        def terms(q):
            dist = normalize(kind, None, q, tol)
            return mean_limited_bound(dist), dist.mu
    elif method == "lerch":
        def terms(q):
            br = poilog_lerch_bracket(q, c)
            return br.composite(q), br.mu_lo
    elif method == "elementary":
        def terms(q):
            br = poidigamma_elementary_bracket(q, c)
            return br.composite(q), br.mu_lo
    else:
        raise ValueError(f"unknown Poisson method {method!r}")
    return terms


def _check_d(d):
    if not 0.0 < d < 1.0:
        raise ValueError(f"d must lie in (0, 1), got {d}")


def deletion_slope_fn(method, p, tol=DEFAULT, c=CONSTANTS):
    """q -> slope objective (nats) for the deletion channel with retention p."""
    terms = _deletion_terms(method, p, tol, c)

    def slope(q):
        num, mu = terms(q)
        return num / (1.0 + mu)
    return slope


def poisson_slope_fn(method, d, tol=DEFAULT, c=CONSTANTS):
    """q -> bound / (1 - d) (nats) for the Poisson-repeat channel."""
    terms = _poisson_terms(method, tol, c)
    w = (1.0 - d) / -math.log(d)

    def slope(q):
        num, mu = terms(q)
        return num / (mu * w + 1.0)
    return slope


def deletion_bound(d, method="BinTrunc", tol=DEFAULT, c=CONSTANTS):
    """(1 - d) sup_q slope(q) for the deletion channel."""
    _check_d(d)
    method = _method_name(method)
    q, s = maximize_unimodal(deletion_slope_fn(method, 1.0 - d, tol, c), tol.q_tol)
    return BoundResult((1.0 - d) * s, q, method, d, tol.q_tol, s)


def poisson_repeat_bound(d, method="PoiDigamma", tol=DEFAULT, c=CONSTANTS):
    """sup_q (-mu log q - log y0) / (-mu / log d + 1 / (1 - d))."""
    _check_d(d)
    method = _method_name(method)
    q, s = maximize_unimodal(poisson_slope_fn(method, d, tol, c), tol.q_tol)
    return BoundResult((1.0 - d) * s, q, method, d, tol.q_tol, s)


# limit laws as p -> 0: BinTrunc -> PoiDigamma, InvBin -> PoiLog
_DELETION_LIMIT = {"BinTrunc": "PoiDigamma", "InvBin": "PoiLog"}


def poisson_limit_slope(method="PoiDigamma", tol=DEFAULT, c=CONSTANTS):
    """lim_{d -> 1} bound / (1 - d) = sup_q (-mu log q - log y0) / (mu + 1)."""
    terms = _poisson_terms(method, tol, c)

    def slope(q):
        num, mu = terms(q)
        return num / (mu + 1.0)
    q, s = maximize_unimodal(slope, tol.q_tol)
    return BoundResult(0.0, q, method, 1.0, tol.q_tol, s)


def deletion_limit_slope(method="BinTrunc", end=1.0, tol=DEFAULT, c=CONSTANTS):
    """Slope of the deletion bound as d -> 1 (``end=1``) or d -> 0 (``end=0``).

    At d -> 1 the exact families are replaced by their p -> 0 limit laws and
    the estimates are evaluated at p = 0. At d -> 0 every method reduces to
    the geometric law, whose slope h(q) peaks at log 2.
    """
    if end == 0.0:
        q, s = maximize_unimodal(lambda x: binary_entropy(x), tol.q_tol)
        return BoundResult(s, q, method, 0.0, tol.q_tol, s)
    if end != 1.0:
        raise ValueError("end must be 0 or 1")
    method = _method_name(method)
    if method in _DELETION_LIMIT:
        r = poisson_limit_slope(_DELETION_LIMIT[method], tol, c)
        return BoundResult(0.0, r.q_star, method, 1.0, tol.q_tol, r.slope_nats)
    q, s = maximize_unimodal(deletion_slope_fn(method, 0.0, tol, c), tol.q_tol)
    return BoundResult(0.0, q, method, 1.0, tol.q_tol, s)


# -- closed forms --

LOG2_PHI = math.log(PHI) / LOG2
EXPLICIT_SMALL_D_COEF = math.log(4.0 / PHI) / LOG2


def explicit_bound(d):
    """Closed-form bound in bits and whether it is conditional.

    d >= 1/2: (1 - d) log2(phi), unconditional.
    d < 1/2: 1 - d log2(4/phi), the convexified line to (0, 1), conditional
    on convexity of the capacity in d.
    """
    _check_d(d)
    if d >= 0.5:
        return (1.0 - d) * LOG2_PHI, False
    return 1.0 - d * EXPLICIT_SMALL_D_COEF, True


def cber_small_p_closed(p, c=CONSTANTS):
    """beta0 h(q*) / (2 - (3 - 2 beta1) q*) in bits, with q* = (1 - q*)^(beta1 - 1/2).

    Returns ``(slope_bits, q_star)`` for p <= 1/2.
    """
    if not 0.0 <= p <= 0.5:
        raise ValueError("cber_small_p_closed requires 0 <= p <= 1/2")
    b0, b1 = c.beta0(p), c.beta1(p)
    e = b1 - 0.5
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        if mid - (1.0 - mid) ** e < 0.0:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    slope = b0 * binary_entropy(q) / (2.0 - (3.0 - 2.0 * b1) * q)
    return slope / LOG2, q
