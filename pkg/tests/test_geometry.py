import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.optimize import brentq

from sads_dirac import SpacetimeParams
from sads_dirac import geometry as geo


def test_params_validation():
    with pytest.raises(ValueError):
        SpacetimeParams(1.0, 1.0, 1.0, 0.1)  # ml = 1
    with pytest.raises(ValueError):
        SpacetimeParams(-1.0, 1.0, 2.0, 0.1)
    with pytest.raises(ValueError):
        SpacetimeParams(1.0, 1.0, 2.0, 0.0)
    p = SpacetimeParams(1.0, 2.0, 1.0, 0.1)
    assert p.ml == 2.0
    assert p.with_h(0.05).h == 0.05


def test_metric_values(unit_bh):
    assert geo.metric_F(1.0, unit_bh) == 0.0
    assert geo.metric_F(2.0, unit_bh) == 4.0
    with pytest.raises(ValueError):
        geo.metric_F(0.0, unit_bh)


def test_horizon_unit(unit_bh):
    hd = geo.horizon_radius(unit_bh)
    assert abs(hd.r_SAdS - 1.0) < 1e-10
    assert hd.p_plus == pytest.approx(1.2638, abs=1e-4)
    assert hd.p_minus == pytest.approx(-0.2638, abs=1e-4)
    assert geo.metric_F(hd.r_SAdS * (1 + 1e-6), unit_bh) > 0


def test_horizon_bisection_oracle():
    p = SpacetimeParams(2.0, 3.0, 1.0, 0.1)
    hd = geo.horizon_radius(p)
    root = brentq(lambda r: geo.metric_F(r, p), 1e-6, 1e3, xtol=1e-14)
    assert abs(hd.r_SAdS - root) < 1e-10
    assert abs(geo.metric_F(hd.r_SAdS, p)) < 1e-10
    # exactly one sign change on (eps, 1e3)
    r = np.geomspace(1e-6, 1e3, 20001)
    assert np.count_nonzero(np.diff(np.sign(geo.metric_F(r, p)))) == 1


def test_factored_form_matches(unit_bh):
    r = np.geomspace(1.001, 1e3, 50)
    np.testing.assert_allclose(geo.metric_F_factored(r, unit_bh), geo.metric_F(r, unit_bh), rtol=1e-12)


def test_F_prime_by_differences(unit_bh):
    r = np.linspace(1.5, 20.0, 10)
    step = 1e-5 * r
    fd = (geo.metric_F(r + step, unit_bh) - geo.metric_F(r - step, unit_bh)) / (2 * step)
    np.testing.assert_allclose(geo.metric_F_prime(r, unit_bh), fd, rtol=1e-8)


def test_tortoise_limits(unit_bh):
    r = 1e4
    x = geo.tortoise_from_radius(r, unit_bh)
    assert x < 0
    assert abs(x + 1.0 / r) / (1.0 / r) < 1e-3
    # log divergence at a simple root: x ~ ln(r - r_SAdS) / F'(r_SAdS), F'(1) = 4
    x6 = geo.tortoise_from_radius(1.0 + 1e-6, unit_bh)
    x9 = geo.tortoise_from_radius(1.0 + 1e-9, unit_bh)
    assert (x9 - x6) == pytest.approx(math.log(1e-3) / 4.0, rel=1e-5)
    assert geo.tortoise_from_gap(1e-20, unit_bh) < -10
    assert geo.tortoise_from_radius(1e9, unit_bh) > -1e-8
    with pytest.raises(ValueError):
        geo.tortoise_from_radius(0.5, unit_bh)


def test_tortoise_routes_agree(unit_bh):
    r = np.geomspace(1 + 1e-8, 1e7, 40)
    xq = geo.tortoise_from_radius(r, unit_bh)
    xc = geo.tortoise_from_radius(r, unit_bh, method="closed")
    np.testing.assert_allclose(xq, xc, rtol=1e-11, atol=1e-13)


def test_quadrature_tolerance_stable(unit_bh):
    r = np.geomspace(1.001, 1e5, 20)
    x1, err = geo.tortoise_from_radius(r, unit_bh, rtol=1e-10, return_error=True)
    x2 = geo.tortoise_from_radius(r, unit_bh, rtol=5e-11)
    assert np.all(np.abs(x1 - x2) <= np.maximum(err, 1e-10 * np.abs(x1)) + 1e-14)


def test_tortoise_monotone(work):
    r = geo.horizon_radius(work).r_SAdS * (1 + np.geomspace(1e-9, 1e6, 300))
    x = geo.tortoise_from_radius(r, work, method="closed")
    assert np.all(np.diff(x) > 0)
    assert np.all(x < 0)


def test_inverse_examples(unit_bh):
    r0 = 2.0
    x0 = geo.tortoise_from_radius(r0, unit_bh)
    assert abs(geo.radius_from_tortoise(x0, unit_bh) - r0) / r0 < 1e-8
    assert geo.radius_from_tortoise(-1e-3, unit_bh) == pytest.approx(1e3, rel=1e-2)
    assert geo.radius_from_tortoise(-60.0, unit_bh) - 1.0 < 1e-20
    with pytest.raises(ValueError):
        geo.radius_from_tortoise(0.0, unit_bh)


def test_gap_deep_horizon(unit_bh):
    # the gap keeps relative precision where r itself rounds to r_SAdS
    x = -20.0
    u = geo.gap_from_tortoise(x, unit_bh)
    assert geo.tortoise_from_gap(u, unit_bh) == pytest.approx(x, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(-200.0, -1e-6), st.floats(0.01, 5.0), st.floats(0.2, 5.0))
def test_roundtrip_property(x, M, l):
    p = SpacetimeParams(M, l, 2.0 / l, 0.1)
    # gaps below the normal double range cannot carry the full precision
    assume(geo.metric_F_prime(geo.horizon_radius(p).r_SAdS, p) * x > -650.0)
    u = geo.gap_from_tortoise(x, p)
    assert u > 0
    back = geo.tortoise_from_gap(u, p)
    assert abs(back - x) < 1e-9 * max(1.0, abs(x))


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1e4), st.floats(0.05, 3.0))
def test_roundtrip_from_radius(gap_rel, M):
    p = SpacetimeParams(M, 1.0, 2.0, 0.1)
    a = geo.horizon_radius(p).r_SAdS
    r = a * (1 + gap_rel)
    x = geo.tortoise_from_radius(r, p, method="closed")
    assert geo.radius_from_tortoise(x, p) == pytest.approx(r, rel=1e-8)


def test_horizon_scaling():
    p1 = SpacetimeParams(0.3, 1.2, 2.0, 0.1)
    p2 = SpacetimeParams(0.6, 2.4, 1.0, 0.1)
    assert geo.horizon_radius(p2).r_SAdS == pytest.approx(2 * geo.horizon_radius(p1).r_SAdS, rel=1e-13)
    assert math.isclose(geo.constants(p1).a, geo.horizon_radius(p1).r_SAdS)
