"""Special functions with explicit accuracy targets.

log-gamma and digamma delegate to ``scipy.special``; E1, Li, eta and the
Lerch transcendent are evaluated here.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from ._backend import kernels

EULER_GAMMA = 0.57721566490153286061
E1_SWITCH = 1.0


@dataclass(frozen=True)
class AccuracyContract:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("accuracy targets must be positive")


DEFAULT_ACCURACY = AccuracyContract()


def _require_positive(name, x):
    if np.any(np.asarray(x) <= 0):
        raise ValueError(f"{name} requires a positive argument")


def log_gamma(x):
    """log Gamma(x) for x > 0 (scalar or array)."""
    _require_positive("log_gamma", x)
    return special.gammaln(x)


def digamma(x):
    """psi(x) = Gamma'(x) / Gamma(x) for x > 0."""
    _require_positive("digamma", x)
    return special.psi(x)


def _e1_series(x):
    # -gamma - log x - sum_{j>=1} (-x)^j / (j j!)
    total = 0.0
    term = 1.0
    j = 1
    while True:
        term *= -x / j
        inc = term / j
        total += inc
        if abs(inc) <= 1e-17 * abs(total) or j > 200:
            break
        j += 1
    return -EULER_GAMMA - math.log(x) - total


def _e1_contfrac(x):
    # modified Lentz on e^{-x} / (x + 1 - 1^2/(x + 3 - 2^2/(x + 5 - ...)))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) <= 1e-16:
            break
    return h * math.exp(-x)


def exp_integral_e1(x):
    """E1(x) = int_1^inf e^{-xt}/t dt for x > 0.

    Power series below ``E1_SWITCH``, continued fraction above.
    """
    x = float(x)
    if not x > 0:
        raise ValueError("exp_integral_e1 requires x > 0")
    if x <= E1_SWITCH:
        return _e1_series(x)
    return _e1_contfrac(x)


def log_integral(z):
    """Li(z) = int_0^z dt / log t for 0 <= z < 1, via Li(z) = -E1(-log z)."""
    z = float(z)
    if not 0.0 <= z < 1.0:
        raise ValueError("log_integral requires 0 <= z < 1")
    if z == 0.0:
        return 0.0
    return -exp_integral_e1(-math.log(z))


def eta(z, abs_tol=1e-13):
    """eta(z) = int_0^z dt / ((1 - t) log t) for 0 <= z < 1.

    With t = e^{-s} the integral becomes -int_a^inf ds / (s (e^s - 1)),
    a = -log z. The 1/s^2 - 1/(2s) singular part of the integrand is
    integrated in closed form on [a, 1].
    """
    z = float(z)
    if not 0.0 <= z < 1.0:
        raise ValueError("eta requires 0 <= z < 1")
    if z == 0.0:
        return 0.0
    a = -math.log(z)
    opts = dict(epsabs=abs_tol, epsrel=1e-13, limit=200)
    if a >= 1.0:
        tail, _ = integrate.quad(kernels.ETA_TAIL, a, np.inf, **opts)
        return -tail
    head, _ = integrate.quad(kernels.ETA_REMAINDER, a, 1.0, **opts)
    tail, _ = integrate.quad(kernels.ETA_TAIL, 1.0, np.inf, **opts)
    closed = (1.0 / a - 1.0) + 0.5 * math.log(a)
    return -(closed + head + tail)


def eta_series(z, rel_tol=1e-14, max_terms=10**7):
    """eta(z) as sum_{j>=1} Li(z^j); used as a cross-check."""
    z = float(z)
    if not 0.0 <= z < 1.0:
        raise ValueError("eta_series requires 0 <= z < 1")
    if z == 0.0:
        return 0.0
    total = 0.0
    zj = z
    for _ in range(max_terms):
        term = log_integral(zj)
        total += term
        # |Li(w)| <= w / |log w| and the z^j decay geometrically
        w = zj * z
        if w == 0.0 or (w / -math.log(w)) / (1.0 - z) <= rel_tol * abs(total):
            break
        zj = w
    return total


def lerch_phi(z, s, alpha, rel_tol=1e-13, max_terms=10**7, full=False):
    """Lerch transcendent Phi(z, s, alpha) = sum_k z^k / (k + alpha)^s.

    Direct series with a geometric tail bound. ``full=True`` also returns
    the achieved relative tail bound and the number of terms.
    """
    z = float(z)
    alpha = float(alpha)
    if not 0.0 < z < 1.0:
        raise ValueError("lerch_phi requires 0 < z < 1")
    if not alpha > 0.0:
        raise ValueError("lerch_phi requires alpha > 0")
    value, tail, n = kernels.lerch_series(z, float(s), alpha, rel_tol, max_terms)
    if not tail <= rel_tol * abs(value):
        warnings.warn(f"lerch_phi stopped after {n} terms with relative tail "
                      f"bound {tail / abs(value):.3g}", RuntimeWarning, stacklevel=2)
    if full:
        return value, tail / abs(value), n
    return value


def binary_entropy(p):
    """h(p) in nats, with h(0) = h(1) = 0."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("binary_entropy requires p in [0, 1]")
    out = -special.xlogy(p, p) - special.xlogy(1.0 - p, 1.0 - p)
    return float(out) if out.ndim == 0 else out


def binary_entropy_bits(p):
    return binary_entropy(p) / math.log(2.0)


def log_binomial_real(x, y):
    """log Gamma(1+x) - log Gamma(1+y) - log Gamma(1+x-y) for 0 <= y <= x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y > x):
        raise ValueError("log_binomial_real requires 0 <= y <= x")
    out = special.gammaln(1.0 + x) - special.gammaln(1.0 + y) - special.gammaln(1.0 + x - y)
    return float(out) if out.ndim == 0 else out
