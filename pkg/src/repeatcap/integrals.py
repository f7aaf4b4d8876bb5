"""Singular t-integrals behind the truncated binomial construction.

All integrals are evaluated with adaptive Gauss-Kronrod subdivision
(``scipy.integrate.quad``). The integrands patch their removable limits
at t = 0 and vanish at t = 1 where 1/log(1-t) -> 0.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from ._backend import kernels
from .specfun import eta, log_binomial_real, log_integral


class PrecisionWarning(RuntimeWarning):
    """An alternating finite sum lost too many significant digits."""


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-11
    max_subdivisions: int = 2000
    endpoint_shave: float = 1e-12
    rel_tol: float = 1e-13

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")


DEFAULT_QUAD = QuadratureConfig()


def _quad(func, lo, hi, args, cfg, points=None):
    if hi <= lo:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(func, lo, hi, args=args, epsabs=cfg.abs_tol,
                                epsrel=cfg.rel_tol, limit=cfg.max_subdivisions,
                                points=points)
    return val


def _scale_points(scale):
    # the integrand changes character near t ~ 1/scale
    if scale > 4.0:
        return [1.0 / scale]
    return None


def trunc_integral(a, y, b, cfg=DEFAULT_QUAD):
    """int_0^1 (1 - a t y - (1 - a t)^y) / (t log(1 - b t)) dt."""
    if y == 0.0 or y == 1.0:
        return 0.0
    return _quad(kernels.TRUNC_INTEGRAND, 0.0, 1.0, (a, y, b), cfg,
                 _scale_points(a * y))


def log_tail_integral(lo, hi, c, x, shift=0.0, cfg=DEFAULT_QUAD):
    """int_lo^hi ((1 - c t)^x - shift) / (t log(1 - t)) dt for 0 < lo."""
    pts = None
    if c * x > 4.0 and lo < 1.0 / (c * x) < hi:
        pts = [1.0 / (c * x)]
    return _quad(kernels.POW_INTEGRAND, lo, hi, (c, x, shift), cfg, pts)


def cal_e(p, x, cfg=DEFAULT_QUAD):
    """E_p(x), the binomial transform of log y!.

    For p in (0, 1] and real x >= 0 this is the integral
    int_0^1 (1 - p t x - (1 - p t)^x) / (t log(1 - t)) dt, which equals
    E[log Y!] for Y ~ Bin(x, p) at integer x. For p > 1, x must be a
    non-negative integer and the finite alternating sum is used.
    """
    p = float(p)
    if not p > 0:
        raise ValueError("cal_e requires p > 0")
    if x < 0:
        raise ValueError("cal_e requires x >= 0")
    if p <= 1.0:
        return trunc_integral(p, float(x), 1.0, cfg)
    if x != int(x):
        raise ValueError("cal_e with p > 1 requires integer x")
    return _cal_e_finite(p, int(x))


def _cal_e_finite(p, x):
    if x <= 1:
        return 0.0
    k = np.arange(2, x + 1)
    logmag = (log_binomial_real(float(x), k.astype(float)) + k * math.log(p)
              + (x - k) * math.log(abs(1.0 - p)) + np.log(gammaln(k + 1.0)))
    sign = np.where((x - k) % 2 == 1, -1.0, 1.0) if p > 1.0 else 1.0
    terms = sign * np.exp(logmag)
    total = math.fsum(terms)
    mag = float(np.sum(np.abs(terms)))
    if total == 0.0 or mag > 1e6 * abs(total):
        warnings.warn(f"cal_e({p}, {x}) alternating sum lost more than 6 digits",
                      PrecisionWarning, stacklevel=3)
    return total


def lambda_trunc(eps, y, cfg=DEFAULT_QUAD):
    """Lambda_eps(y) = int_0^1 (1 - t y - (1 - t)^y) / (t log(1 - eps t)) dt."""
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise ValueError("lambda_trunc requires 0 < eps <= 1")
    if y < 0:
        raise ValueError("lambda_trunc requires y >= 0")
    return trunc_integral(1.0, float(y), eps, cfg)


def expected_lambda(eps, p, x, cfg=DEFAULT_QUAD):
    """E[Lambda_eps(Y)] for Y ~ Bin(x, p), by the closed form in E_{p/eps}."""
    eps = float(eps)
    p = float(p)
    if not 0.0 < eps <= 1.0 or not 0.0 < p <= 1.0:
        raise ValueError("expected_lambda requires eps, p in (0, 1]")
    if x < 0 or x != int(x):
        raise ValueError("expected_lambda requires a non-negative integer x")
    x = int(x)
    if x == 0:
        return 0.0
    val = cal_e(p / eps, x, cfg)
    if eps < 1.0:
        val += x * p * log_integral(1.0 - eps) / eps - eta(1.0 - eps)
        val += log_tail_integral(eps, 1.0, p / eps, x, 0.0, cfg)
    return val


def r_gap(p, x, cfg=DEFAULT_QUAD):
    """Residual R_p(x) >= 0 of the truncated binomial KKT condition."""
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError("r_gap requires p in (0, 1]")
    if x < 0:
        raise ValueError("r_gap requires x >= 0")
    if p == 1.0 or x == 0:
        return 0.0
    x = float(x)
    if p >= 0.5:
        return log_tail_integral(p, 1.0, 1.0, x, (1.0 - p) ** x, cfg)
    mid = p / (1.0 - p)
    first = log_tail_integral(p, 1.0, 1.0, x, 0.0, cfg)
    second = log_tail_integral(mid, 1.0, 1.0 - p, x, 0.0, cfg)
    third = log_tail_integral(p, mid, 0.0, 0.0, 0.0, cfg)
    return first - second - (1.0 - p) ** x * third
