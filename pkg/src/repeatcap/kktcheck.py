"""Numerical dual-feasibility checks.

For a channel whose output given input x is the x-fold convolution Y_x of
the repetition law, a candidate output law Y with parameters (y0, q) is
dual feasible when KL(Y_x || Y) <= -log(q) E[Y_x] - log(y0) for all x.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .dists import DistKind
from .integrals import r_gap
from .simchannel import RepetitionRule
from .specfun import exp_integral_e1
from .tolerances import DEFAULT


class InfiniteDivergenceError(ValueError):
    pass


def _poisson_cut(lam, tol):
    """Smallest k with Pr[Poisson(lam) > k] <= tol.

    poisson.isf returns nan for tol below about 1e-16; then bisect on logsf.
    """
    k = stats.poisson.isf(tol, lam)
    if np.isfinite(k):
        return int(k) + 1
    target = math.log(tol)
    lo = 0
    hi = max(1, int(lam + 10.0 * math.sqrt(lam) + 10.0))
    while stats.poisson.logsf(hi, lam) > target:
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if stats.poisson.logsf(mid, lam) > target:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class Transition:
    """Y_x ~ Bin(x, p) for a Bernoulli rule and Poisson(lambda x) for a Poisson rule."""

    rule: RepetitionRule

    @classmethod
    def of(cls, channel):
        if isinstance(channel, Transition):
            return channel
        if isinstance(channel, RepetitionRule):
            return cls(channel)
        raise TypeError("channel must be a RepetitionRule or Transition")

    @property
    def is_poisson(self):
        return self.rule.kind == "poisson"

    def mean(self, x):
        return self.rule.param * x

    def support(self, x, tol):
        """Range of y carrying all but ``tol`` of the mass, and the dropped mass."""
        if not self.is_poisson:
            return 0, int(x), 0.0
        lam = self.mean(x)
        hi = _poisson_cut(lam, tol)
        return 0, hi, float(stats.poisson.sf(hi, lam))

    def logpmf(self, x, y):
        if self.is_poisson:
            return stats.poisson.logpmf(y, self.mean(x))
        return stats.binom.logpmf(y, int(x), self.rule.param)


def _nu(dist, nu):
    if nu is None:
        return -math.log(dist.q), -math.log(dist.y0)
    return float(nu[0]), float(nu[1])


def kl_divergence(channel, x, dist, tol=DEFAULT):
    """KL(Y_x || Y) in nats.

    Binomial Y_x is summed exactly. Poisson Y_x is truncated where its upper
    tail drops below kkt_tol / 10; the neglected part is bounded by twice
    the tail mass times the log-ratio at the cut (both logs decay at least
    linearly beyond the mode) and extended until that bound is below
    kkt_tol / 10, so truncation uses at most a tenth of the feasibility slack.
    """
    tr = Transition.of(channel)
    if x < 0 or x != int(x):
        raise ValueError("x must be a non-negative integer")
    x = int(x)
    if x == 0:
        return -math.log(dist.y0)
    target = tol.kkt_tol / 10.0
    cut = target
    while True:
        lo, hi, dropped = tr.support(x, cut)
        y = np.arange(lo, hi + 1)
        lp = tr.logpmf(x, y)
        lq = dist.log_pmf(y)
        if not np.all(np.isfinite(lq)):
            raise InfiniteDivergenceError("candidate law lacks support where Y_x has mass")
        keep = np.isfinite(lp)
        terms = np.exp(lp[keep]) * (lp[keep] - lq[keep])
        bound = 2.0 * dropped * (abs(lp[-1] - lq[-1]) + 1.0)
        if bound <= target or cut < 1e-300:
            return math.fsum(terms)
        cut *= 1e-3


@dataclass(frozen=True)
class KKTReport:
    x: int
    kl: float
    linear_bound: float
    gap: float
    predicted_gap: float | None


def predicted_gap(channel, x, dist):
    """Closed-form KKT gap where one is known, else None."""
    tr = Transition.of(channel)
    if dist.kind is DistKind.POIDIGAMMA and tr.is_poisson:
        t = tr.mean(x)
        return 0.0 if t == 0 else t * exp_integral_e1(t)
    if dist.kind is DistKind.BINTRUNC and not tr.is_poisson:
        if abs(dist.p - tr.rule.param) > 1e-15:
            return None
        return r_gap(tr.rule.param, x, dist.cfg)
    return None


def kkt_gap(channel, x, dist, tol=DEFAULT, nu=None):
    """Slack nu1 E[Y_x] + nu0 - KL(Y_x || Y).

    ``nu = (nu1, nu0)`` overrides the dual variables (-log q, -log y0)
    implied by ``dist``.
    """
    tr = Transition.of(channel)
    nu1, nu0 = _nu(dist, nu)
    kl = kl_divergence(tr, x, dist, tol)
    lin = nu1 * tr.mean(x) + nu0
    return KKTReport(int(x), kl, lin, lin - kl, predicted_gap(tr, x, dist))


@dataclass(frozen=True)
class FeasibilityReport:
    passed: bool
    worst_x: int
    worst_gap: float
    x_max: int
    tol: float
    gaps: np.ndarray

    def summary(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} worst_gap={self.worst_gap:.3e} at x={self.worst_x} "
                f"(x_max={self.x_max}, tol={self.tol:g})")


def verify_dual_feasible(channel, dist, x_max=300, tol=DEFAULT, nu=None, xs=None):
    """Check gap >= -kkt_tol for x = 0..x_max (or for the given ``xs``)."""
    if x_max < 1:
        raise ValueError("x_max must be at least 1")
    tr = Transition.of(channel)
    xs = np.arange(x_max + 1) if xs is None else np.asarray(xs, dtype=np.int64)
    gaps = np.array([kkt_gap(tr, int(x), dist, tol, nu).gap for x in xs])
    i = int(np.argmin(gaps))
    return FeasibilityReport(bool(gaps[i] >= -tol.kkt_tol), int(xs[i]), float(gaps[i]),
                             int(xs.max()), tol.kkt_tol, gaps)


def expected_y_digamma(lam, tail=1e-16):
    """E[Y psi(Y)] for Y ~ Poisson(lam), by direct summation."""
    hi = int(stats.poisson.isf(tail, lam)) + 2
    y = np.arange(1, hi + 1)
    return math.fsum(stats.poisson.pmf(y, lam) * y * special.psi(y))


def invbin_jensen_term(p, x):
    """E[f(Y_x)] with f(y) = log C(x, y) - log C(y/p, y) and Y_x ~ Bin(x, p)."""
    y = np.arange(x + 1, dtype=float)
    f = (special.gammaln(x + 1.0) - special.gammaln(y + 1.0) - special.gammaln(x - y + 1.0)
         - (special.gammaln(y / p + 1.0) - special.gammaln(y + 1.0)
            - special.gammaln(y / p - y + 1.0)))
    return math.fsum(stats.binom.pmf(y, x, p) * f)
