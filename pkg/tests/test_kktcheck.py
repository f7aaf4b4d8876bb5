import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from repeatcap.dists import normalize
from repeatcap.integrals import r_gap
from repeatcap.kktcheck import (
    InfiniteDivergenceError,
    KKTReport,
    Transition,
    expected_y_digamma,
    invbin_jensen_term,
    kkt_gap,
    kl_divergence,
    predicted_gap,
    verify_dual_feasible,
)
from repeatcap.simchannel import RepetitionRule
from repeatcap.specfun import exp_integral_e1
from repeatcap.tolerances import Tolerances


def poisson_channel(d):
    return RepetitionRule.poisson(-math.log(d))


def brute_kl(x, p, dist):
    y = np.arange(x + 1)
    pm = stats.binom.pmf(y, x, p)
    return math.fsum(pm * (np.log(pm) - dist.log_pmf(y)))


class TestKL:
    @pytest.mark.parametrize("kind,p", [("PoiLog", None), ("InvBin", 0.4), ("BinTrunc", 0.4)])
    def test_x_zero(self, kind, p):
        dist = normalize(kind, p, 0.5)
        rule = RepetitionRule.bernoulli(0.4) if p else poisson_channel(0.5)
        assert kl_divergence(rule, 0, dist) == -math.log(dist.y0)

    def test_digamma_closed_form(self):
        lam = -math.log(0.9)
        dist = normalize("PoiDigamma", q=0.6)
        kl = kl_divergence(RepetitionRule.poisson(lam), 10, dist)
        want = (-math.log(dist.y0) - 10 * lam * math.log(dist.q)
                - 10 * lam * exp_integral_e1(10 * lam))
        assert kl == pytest.approx(want, abs=1e-9)

    def test_binomial_brute_force(self):
        dist = normalize("InvBin", 0.6, 0.5)
        kl = kl_divergence(RepetitionRule.bernoulli(0.6), 8, dist)
        assert kl == pytest.approx(brute_kl(8, 0.6, dist), abs=1e-13)
        assert kl <= -8 * 0.6 * math.log(dist.q) - math.log(dist.y0)

    def test_invbin_gap_is_jensen_term(self):
        dist = normalize("InvBin", 0.6, 0.5)
        r = kkt_gap(RepetitionRule.bernoulli(0.6), 8, dist)
        assert r.gap == pytest.approx(-invbin_jensen_term(0.6, 8), abs=1e-12)

    def test_poisson_truncation_tolerance(self):
        dist = normalize("PoiLog", q=0.7)
        rule = RepetitionRule.poisson(1.3)
        a = kl_divergence(rule, 40, dist)
        b = kl_divergence(rule, 40, dist, Tolerances(kkt_tol=1e-14))
        assert abs(a - b) <= 1e-8

    @pytest.mark.parametrize("lam", [0.1, 2.0, 52.0, 700.0])
    @pytest.mark.parametrize("cut", [1e-9, 1e-15, 1e-40, 1e-200])
    def test_poisson_cut(self, lam, cut):
        _, hi, dropped = Transition.of(RepetitionRule.poisson(lam)).support(1, cut)
        assert dropped <= cut
        assert stats.poisson.sf(hi - 2, lam) > cut

    def test_input_checks(self):
        dist = normalize("PoiLog", q=0.5)
        with pytest.raises(ValueError):
            kl_divergence(RepetitionRule.poisson(1.0), -1, dist)
        with pytest.raises(ValueError):
            kl_divergence(RepetitionRule.poisson(1.0), 2.5, dist)
        with pytest.raises(TypeError):
            kl_divergence("poisson", 3, dist)

    def test_missing_support(self):
        class PointMass:
            y0 = 1.0
            q = 0.5

            def log_pmf(self, y):
                y = np.asarray(y)
                return np.where(y == 0, 0.0, -np.inf)

        assert issubclass(InfiniteDivergenceError, ValueError)
        with pytest.raises(InfiniteDivergenceError):
            kl_divergence(RepetitionRule.bernoulli(0.5), 3, PointMass())


class TestGap:
    def test_digamma(self):
        rule = poisson_channel(0.9)
        dist = normalize("PoiDigamma", q=0.5)
        r = kkt_gap(rule, 5, dist)
        lx = rule.param * 5
        assert isinstance(r, KKTReport)
        assert abs(r.gap - lx * exp_integral_e1(lx)) <= 1e-7
        assert r.predicted_gap == pytest.approx(lx * exp_integral_e1(lx), rel=1e-14)

    def test_bintrunc(self):
        dist = normalize("BinTrunc", 0.3, 0.5)
        r = kkt_gap(RepetitionRule.bernoulli(0.3), 12, dist)
        assert abs(r.gap - r_gap(0.3, 12)) <= 1e-6

    def test_bintrunc_mismatched_p(self):
        dist = normalize("BinTrunc", 0.3, 0.5)
        assert predicted_gap(RepetitionRule.bernoulli(0.4), 12, dist) is None

    @pytest.mark.parametrize("kind", ["PoiLog", "InvBin"])
    def test_no_prediction(self, kind):
        dist = normalize(kind, 0.5 if kind == "InvBin" else None, 0.5)
        rule = RepetitionRule.bernoulli(0.5) if kind == "InvBin" else poisson_channel(0.5)
        assert kkt_gap(rule, 7, dist).predicted_gap is None

    @pytest.mark.parametrize("kind,p", [("PoiLog", None), ("PoiDigamma", None),
                                        ("InvBin", 0.3), ("BinTrunc", 0.3)])
    def test_zero_at_origin(self, kind, p):
        dist = normalize(kind, p, 0.6)
        rule = RepetitionRule.bernoulli(p) if p else poisson_channel(0.3)
        assert abs(kkt_gap(rule, 0, dist).gap) <= 1e-10

    def test_poilog_asymptote(self):
        dist = normalize("PoiLog", q=0.5)
        g = kkt_gap(RepetitionRule.poisson(2.0), 100, dist).gap
        assert g == pytest.approx(0.5, rel=0.05)

    def test_nu_override(self):
        dist = normalize("PoiLog", q=0.5)
        rule = RepetitionRule.poisson(1.0)
        a = kkt_gap(rule, 4, dist)
        b = kkt_gap(rule, 4, dist, nu=(-math.log(dist.q), -math.log(dist.y0)))
        assert a == b

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=0.05, max_value=0.95), st.integers(min_value=1, max_value=60))
    def test_digamma_gap_any_lambda(self, d, x):
        rule = poisson_channel(d)
        dist = normalize("PoiDigamma", q=0.7)
        lx = rule.param * x
        assert abs(kkt_gap(rule, x, dist).gap - lx * exp_integral_e1(lx)) <= 1e-7


class TestFeasibility:
    def test_invbin_half(self):
        r = verify_dual_feasible(RepetitionRule.bernoulli(0.5), normalize("InvBin", 0.5, 0.5),
                                 x_max=200)
        assert r.passed
        assert r.worst_gap >= -1e-10
        assert "PASS" in r.summary()

    def test_digamma_positive(self):
        r = verify_dual_feasible(poisson_channel(0.5), normalize("PoiDigamma", q=0.5), x_max=200)
        assert r.passed
        assert np.all(r.gaps[1:] > 0)
        assert len(r.gaps) == 201

    def test_negative_control(self):
        dist = normalize("PoiDigamma", q=0.5)
        nu = (-math.log(dist.q), -math.log(dist.y0))
        bad = _perturb(dist, 0.98)
        r = verify_dual_feasible(poisson_channel(0.5), bad, x_max=200, nu=nu)
        assert not r.passed
        assert r.worst_gap < 0
        assert "FAIL" in r.summary()

    def test_explicit_xs(self):
        dist = normalize("InvBin", 0.7, 0.4)
        r = verify_dual_feasible(RepetitionRule.bernoulli(0.7), dist, xs=[0, 5, 50])
        assert len(r.gaps) == 3
        assert r.x_max == 50

    def test_x_max(self):
        with pytest.raises(ValueError):
            verify_dual_feasible(RepetitionRule.bernoulli(0.5), normalize("InvBin", 0.5, 0.5),
                                 x_max=0)

    @pytest.mark.parametrize("kind,p", [("PoiDigamma", None), ("InvBin", 0.4), ("BinTrunc", 0.4)])
    def test_large_x_spot(self, kind, p):
        dist = normalize(kind, p, 0.5)
        rule = RepetitionRule.bernoulli(p) if p else poisson_channel(0.5)
        r = verify_dual_feasible(rule, dist, xs=[1000, 10000], tol=Tolerances(kkt_tol=1e-5))
        assert r.passed


def _perturb(dist, factor):
    # q moved after normalization; the dual variables stay those of dist
    from dataclasses import replace

    return replace(dist, q=dist.q * factor)


class TestIdentities:
    @pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
    def test_expected_y_digamma(self, lam):
        want = lam * (exp_integral_e1(lam) + math.log(lam))
        assert abs(expected_y_digamma(lam) - want) <= 1e-8

    @pytest.mark.parametrize("p,x", [(0.3, 10), (0.7, 15)])
    def test_jensen(self, p, x):
        assert invbin_jensen_term(p, x) <= 0

    def test_transition(self):
        t = Transition.of(RepetitionRule.bernoulli(0.3))
        assert Transition.of(t) is t
        assert not t.is_poisson
        assert t.mean(10) == pytest.approx(3.0)
        assert t.support(10, 1e-9) == (0, 10, 0.0)
        tp = Transition.of(RepetitionRule.poisson(2.0))
        lo, hi, dropped = tp.support(5, 1e-12)
        assert lo == 0 and dropped <= 1e-12 and hi > 10
