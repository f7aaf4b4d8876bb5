import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repeatcap.bounds import (
    CONSTANTS,
    DELETION_METHODS,
    INVPHI,
    LOG2,
    PHI,
    POISSON_METHODS,
    Bracket,
    EstimateConstants,
    FlatObjectiveWarning,
    MultimodalWarning,
    c_ber,
    cber_small_p_closed,
    deletion_bound,
    deletion_limit_slope,
    deletion_slope_fn,
    explicit_bound,
    invbin_elementary_bracket,
    invbin_estimates,
    maximize_unimodal,
    mean_limited_bound,
    poilog_lerch_bracket,
    poisson_estimates,
    poisson_limit_slope,
    poisson_repeat_bound,
)
from repeatcap.dists import normalize
from repeatcap.specfun import binary_entropy
from repeatcap.tolerances import Tolerances

GRID = [round(0.1 * i, 1) for i in range(1, 10)]


def h2(x):
    return binary_entropy(x) / LOG2


def golden_objective(q):
    return binary_entropy(q) / (2.0 - q)


class TestConstants:
    def test_values(self):
        c = CONSTANTS
        assert c.gamma_lo == pytest.approx(0.413099, abs=1e-6)
        assert c.gamma_hi == pytest.approx(0.428882, abs=1e-6)
        assert c.gamma_lo < c.gamma_hi
        assert c.sigma_lo < c.sigma_hi

    def test_beta_half(self):
        assert EstimateConstants.beta0(0.5) == pytest.approx(1.0, abs=1e-15)
        assert EstimateConstants.beta1(0.5) == pytest.approx(1.0, abs=1e-15)

    def test_beta0_limit(self):
        assert EstimateConstants.beta0(1e-7) == pytest.approx(2 / math.e, rel=1e-6)

    def test_override(self):
        c = EstimateConstants(sigma_hi=0.18)
        wide = poilog_lerch_bracket(0.5, c)
        base = poilog_lerch_bracket(0.5)
        assert wide.ell_lo < base.ell_lo


class TestMaximizer:
    def test_golden(self):
        q, f = maximize_unimodal(golden_objective)
        assert q == pytest.approx(INVPHI, abs=1e-7)
        # the maximum is log(phi); (log phi)/2 carries the extra factor p = 1/2
        assert f == pytest.approx(math.log(PHI), abs=1e-14)

    def test_entropy(self):
        q, f = maximize_unimodal(binary_entropy)
        assert q == pytest.approx(0.5, abs=1e-7)
        assert f == pytest.approx(LOG2, abs=1e-14)

    def test_quadratic(self):
        q, _ = maximize_unimodal(lambda x: -(x - 0.3) ** 2, tol_q=1e-10)
        assert q == pytest.approx(0.3, abs=1e-9)

    def test_boundary_maximum(self):
        q, _ = maximize_unimodal(lambda x: x)
        assert q == pytest.approx(0.99, abs=1e-8)

    def test_flat_warning(self):
        with pytest.warns(FlatObjectiveWarning):
            maximize_unimodal(lambda x: 1.0)

    def test_multimodal_warning(self):
        with pytest.warns(MultimodalWarning):
            q, _ = maximize_unimodal(lambda x: math.cos(12 * math.pi * x) + 0.1 * x)
        assert q > 0.8

    def test_quiet_on_slope(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            maximize_unimodal(deletion_slope_fn("InvBin", 0.5))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            maximize_unimodal(lambda x: math.inf)


class TestMeanLimited:
    def test_digamma_half(self):
        # printed mean-table row substituted: 0.252846 log 2 + 0.159182
        v = mean_limited_bound(normalize("PoiDigamma", q=0.5))
        assert v == pytest.approx(0.252846 * LOG2 + 0.159182, abs=2e-6)

    def test_degenerate(self):
        assert mean_limited_bound(normalize("PoiLog", q=1e-9)) < 1e-8

    def test_invbin_half_identity(self):
        q = 0.4
        dist = normalize("InvBin", 0.5, q)
        rhs = binary_entropy(q) * (1 + dist.mu) / (2 - q)
        assert mean_limited_bound(dist) == pytest.approx(rhs, rel=1e-12)


class TestCBer:
    def test_golden_value(self):
        assert c_ber(0.5, INVPHI) == pytest.approx(math.log(PHI) / 2, abs=1e-12)
        assert c_ber(0.5, INVPHI) / LOG2 == pytest.approx(0.347120, abs=1e-6)

    @pytest.mark.parametrize("kind", ["InvBin", "BinTrunc"])
    @pytest.mark.parametrize("q", GRID)
    def test_p_one(self, kind, q):
        assert abs(c_ber(1.0, q, kind) - binary_entropy(q)) <= 1e-10

    def test_refined_tolerance(self):
        a = c_ber(0.1, 0.5)
        b = c_ber(0.1, 0.5, tol=Tolerances(tail_rel=1e-15))
        assert abs(a - b) <= 1e-9

    def test_kind_check(self):
        with pytest.raises(ValueError):
            c_ber(0.5, 0.5, "PoiLog")

    def test_half_slope_equals_golden_max(self):
        r = deletion_bound(0.5, "InvBin")
        _, f = maximize_unimodal(golden_objective)
        assert abs(r.slope_nats - f) <= 1e-9


class TestDeletionBound:
    def test_golden_ratio(self):
        r = deletion_bound(0.5, "InvBin")
        assert r.value_nats == pytest.approx(math.log(PHI) / 2, abs=1e-9)
        assert r.value_bits == pytest.approx(0.347120, abs=1e-6)
        assert r.q_star == pytest.approx(INVPHI, abs=1e-6)

    def test_result_fields(self):
        r = deletion_bound(0.3, "InvBin")
        assert r.method == "InvBin"
        assert r.d == 0.3
        assert 0 < r.q_star < 1
        assert 0 <= r.value_bits <= 1
        assert r.value_bits == pytest.approx(0.7 * r.slope_bits, rel=1e-14)

    def test_method_enum_and_case(self):
        from repeatcap.dists import DistKind

        a = deletion_bound(0.4, DistKind.INVBIN)
        b = deletion_bound(0.4, "invbin")
        assert a == b

    @pytest.mark.parametrize("d", [0.0, 1.0, -0.2])
    def test_domain(self, d):
        with pytest.raises(ValueError):
            deletion_bound(d)

    def test_unknown(self):
        with pytest.raises(ValueError):
            deletion_bound(0.5, "PoiLog")
        with pytest.raises(ValueError):
            poisson_repeat_bound(0.5, "InvBin")
        with pytest.raises(ValueError):
            deletion_bound(0.5, "bogus")

    @pytest.mark.parametrize("d", [0.001, 0.002, 0.005])
    def test_small_d_envelope(self, d):
        v = deletion_bound(d, "InvBin").value_bits
        assert 1 - 0.6 * h2(d) <= v <= 1 - 0.4 * h2(d)

    def test_below_erasure_for_exact_methods(self):
        for d in (0.1, 0.5, 0.9):
            for m in ("BinTrunc", "InvBin"):
                assert deletion_bound(d, m).value_bits <= 1 - d + 1e-9

    def test_limit_d_zero(self):
        r = deletion_limit_slope("InvBin", end=0)
        assert r.slope_bits == pytest.approx(1.0, abs=1e-12)
        with pytest.raises(ValueError):
            deletion_limit_slope("InvBin", end=0.5)


class TestDominance:
    DS = [round(0.05 * i, 2) for i in range(1, 20)]

    @pytest.mark.parametrize("d", DS)
    def test_deletion(self, d):
        v = {m: deletion_bound(d, m).value_nats for m in DELETION_METHODS}
        slack = 1e-12
        assert v["BinTrunc"] <= v["InvBin"] + slack
        assert v["InvBin"] <= v["lerch"] + slack
        assert v["InvBin"] <= v["elementary"] + slack

    @pytest.mark.parametrize("d", DS)
    def test_poisson(self, d):
        v = {m: poisson_repeat_bound(d, m).value_nats for m in POISSON_METHODS}
        slack = 1e-12
        assert v["PoiDigamma"] <= v["PoiLog"] + slack
        assert v["PoiLog"] <= v["lerch"] + slack
        assert v["PoiDigamma"] <= v["elementary"] + slack


class TestLimits:
    @pytest.mark.parametrize("method,value,q", [
        ("PoiDigamma", 0.464420, 0.724762),
        ("PoiLog", 0.601549, 0.659046),
        ("lerch", 0.602987, 0.658810),
        ("elementary", 0.479454, 0.727855),
    ])
    def test_poisson(self, method, value, q):
        r = poisson_limit_slope(method)
        assert abs(r.slope_bits - value) <= 5e-5
        assert abs(r.q_star - q) <= 5e-4

    @pytest.mark.parametrize("method,value", [
        ("BinTrunc", 0.4644), ("InvBin", 0.6015), ("lerch", 0.6115), ("elementary", 0.6196),
    ])
    def test_deletion(self, method, value):
        assert abs(deletion_limit_slope(method).slope_bits - value) <= 5e-4

    def test_deletion_q(self):
        assert deletion_limit_slope("BinTrunc").q_star == pytest.approx(0.7247, abs=5e-4)
        assert deletion_limit_slope("lerch").q_star == pytest.approx(0.6573, abs=5e-4)
        assert deletion_limit_slope("elementary").q_star == pytest.approx(0.6644, abs=5e-4)

    def test_approach(self):
        # the d -> 1 slope is approached by the finite-d objective
        lim = poisson_limit_slope("PoiDigamma").slope_nats
        near = poisson_repeat_bound(0.999, "PoiDigamma").slope_nats
        assert abs(near - lim) < 1e-3


class TestExplicit:
    def test_half(self):
        v, cond = explicit_bound(0.5)
        assert round(v, 6) == 0.347121
        assert cond is False

    def test_values(self):
        assert explicit_bound(0.75)[0] == pytest.approx(0.173561, abs=1e-6)
        v, cond = explicit_bound(0.25)
        assert v == pytest.approx(0.673561, abs=1e-6)
        assert cond is True

    def test_continuous_at_half(self):
        assert explicit_bound(0.5 - 1e-12)[0] == pytest.approx(explicit_bound(0.5)[0], abs=1e-10)

    def test_dominates_invbin_above_half(self):
        for d in (0.5, 0.7, 0.9):
            assert explicit_bound(d)[0] >= deletion_bound(d, "InvBin").value_bits - 1e-9


class TestClosedForm:
    def test_half(self):
        s, q = cber_small_p_closed(0.5)
        assert q == pytest.approx(INVPHI, abs=1e-12)
        assert s == pytest.approx(0.694242, abs=1e-6)
        _, f = maximize_unimodal(golden_objective)
        assert s * LOG2 == pytest.approx(f, abs=1e-12)

    def test_residual(self):
        _, q = cber_small_p_closed(0.3)
        e = EstimateConstants.beta1(0.3) - 0.5
        assert abs(q - (1 - q) ** e) <= 1e-10

    def test_small_p(self):
        s, _ = cber_small_p_closed(0.0)
        exact = deletion_bound(1 - 1e-4, "InvBin").slope_bits
        assert math.isfinite(s)
        assert s >= exact
        assert exact == pytest.approx(0.6015, abs=5e-4)

    def test_domain(self):
        with pytest.raises(ValueError):
            cber_small_p_closed(0.6)


class TestEstimates:
    def test_poilog_half(self):
        br = poisson_estimates(0.5).lerch
        assert br.mu_lo <= 0.393231 <= br.mu_hi
        assert br.ell_lo <= 0.263914 <= br.ell_hi

    def test_record(self):
        est = poisson_estimates(0.5)
        assert est.lerch_bound == pytest.approx(est.lerch.composite(0.5))
        assert est.elementary_bound >= mean_limited_bound(normalize("PoiDigamma", q=0.5))

    def test_invbin_half_exact(self):
        br = invbin_elementary_bracket(0.5, 0.3)
        assert br.width == pytest.approx(0.0, abs=1e-15)
        d = normalize("InvBin", 0.5, 0.3)
        assert br.ell_lo == pytest.approx(-math.log(d.y0), rel=1e-12)
        assert br.mu_lo == pytest.approx(d.mu, rel=1e-12)

    def test_invbin_contains(self):
        d = normalize("InvBin", 0.1, 0.5)
        est = invbin_estimates(0.1, 0.5)
        assert est.elementary.contains(-math.log(d.y0), d.mu)
        assert est.lerch.contains(-math.log(d.y0), d.mu)

    @pytest.mark.parametrize("q", [0.1, 0.3, 0.5, 0.7, 0.9])
    def test_poilog_tightness(self, q):
        d = normalize("PoiLog", q=q)
        br = poilog_lerch_bracket(q)
        ell = -math.log(d.y0)
        for lo_hi, exact in (((br.mu_lo, br.mu_hi), d.mu), ((br.ell_lo, br.ell_hi), ell)):
            assert lo_hi[0] >= exact / 1.01
            assert lo_hi[1] <= exact * 1.01

    def test_bracket_contains_slack(self):
        br = Bracket(1.0, 2.0, 3.0, 4.0)
        assert br.contains(1.5, 3.5)
        assert not br.contains(0.9, 3.5)
        assert not br.contains(1.5, 4.1)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.02, max_value=0.98), st.floats(min_value=0.02, max_value=0.95))
def test_sandwich_property(p, q):
    exact = normalize("InvBin", p, q)
    ell = -math.log(exact.y0)
    est = invbin_estimates(p, q)
    assert est.elementary.contains(ell, exact.mu)
    assert est.lerch.contains(ell, exact.mu)
    pl = normalize("PoiLog", q=q)
    pd = normalize("PoiDigamma", q=q)
    assert poilog_lerch_bracket(q).contains(-math.log(pl.y0), pl.mu)
    assert poisson_estimates(q).elementary.contains(-math.log(pd.y0), pd.mu)


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.95))
def test_invbin_dominates_explicit_half(q):
    # at p = 1/2 the slope objective is exactly h(q)/(2-q)
    s = deletion_slope_fn("InvBin", 0.5)(q)
    assert s == pytest.approx(golden_objective(q), rel=1e-11)


def test_slope_grid_single_peak():
    f = deletion_slope_fn("BinTrunc", 0.5)
    vals = np.array([f(q) for q in np.linspace(0.01, 0.99, 64)])
    peaks = np.sum((vals[1:-1] > vals[:-2]) & (vals[1:-1] >= vals[2:]))
    if peaks != 1:
        warnings.warn("BinTrunc slope has several local maxima", UserWarning)
    assert peaks >= 1
