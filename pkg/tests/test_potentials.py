import math

import numpy as np
import pytest
from scipy.optimize import brentq

from sads_dirac import SpacetimeParams
from sads_dirac import geometry as geo
from sads_dirac import potentials as pot

from oracles import expansion_coefficients


def test_values_at_r2(unit_bh):
    x = geo.tortoise_from_radius(2.0, unit_bh)
    assert pot.potential_A(x, unit_bh) == pytest.approx(1.0, abs=1e-12)
    assert pot.potential_B(x, unit_bh) == pytest.approx(2.0, abs=1e-12)


def test_domain_errors(unit_bh):
    for fn in (pot.potential_A, pot.potential_B, pot.potential_derivatives):
        with pytest.raises(ValueError):
            fn(0.0, unit_bh)


def test_positivity_and_limits(work):
    x = -np.geomspace(1e-5, 60, 400)
    assert np.all(pot.potential_A(x, work) > 0)
    assert np.all(pot.potential_B(x, work) > 0)
    assert pot.potential_A(-1e-6, work) == pytest.approx(1.0, abs=1e-9)
    assert -1e-4 * pot.potential_B(-1e-4, work) == pytest.approx(-1.0, abs=1e-4)
    assert pot.potential_B(-200.0, work) < 1e-30


@pytest.mark.parametrize("M,l", [(0.05, 1.0), (1.0, 1.0), (0.1, 2.0)])
def test_expansion_coefficients(M, l):
    p = SpacetimeParams(M, l, 2.0 / l, 0.1)
    for name, (got, want) in expansion_coefficients(p).items():
        assert got == pytest.approx(want, rel=1e-2), name


def test_derivatives_by_differences(unit_bh):
    x = np.linspace(-3.0, -0.05, 10)
    step = 1e-5
    dA, dB = pot.potential_derivatives(x, unit_bh)
    fdA = (pot.potential_A(x + step, unit_bh) - pot.potential_A(x - step, unit_bh)) / (2 * step)
    fdB = (pot.potential_B(x + step, unit_bh) - pot.potential_B(x - step, unit_bh)) / (2 * step)
    np.testing.assert_allclose(dB, fdB, rtol=1e-6)
    np.testing.assert_allclose(dA, fdA, rtol=1e-6, atol=1e-9)


def test_well_gap_identity(work):
    x = -np.geomspace(1e-3, 3.0, 50)
    A = pot.potential_A(x, work)
    np.testing.assert_allclose(pot.well_gap(x, work), A**2 - 1.0, rtol=1e-9, atol=1e-14)


def test_profile_table_columns(work):
    x = np.array([-0.5, -0.1])
    tab = pot.PotentialProfile(work).table(x)
    assert tab.shape == (2, 7)
    np.testing.assert_allclose(tab[:, 6], tab[:, 2] ** 2)


@pytest.mark.parametrize("M", [0.05, 1.0])
def test_turning_point_asymptotics(M):
    p = SpacetimeParams(M, 1.0, 2.0, 1e-3)
    h, T = 1e-3, 1.0
    xa = pot.turning_point_xA(1.0 + T * h, p)
    assert xa == pytest.approx(-math.sqrt(T * h), rel=0.05)
    assert pot.potential_A(xa, p) ** 2 == pytest.approx(1.0 + T * h, abs=1e-10)


def test_turning_point_continuity(work):
    xs = [pot.turning_point_xA(1.0 + eps, work) for eps in (1e-2, 1e-4, 1e-6)]
    assert xs[0] < xs[1] < xs[2] < 0
    assert abs(xs[2]) < 2e-3


def test_turning_point_errors(work):
    with pytest.raises(ValueError):
        pot.turning_point_xA(1.0, work)
    with pytest.raises(ValueError):
        pot.turning_point_xA(pot.barrier_height(work), work)


def _g(r, M, l):
    return r**4 / (4 * l * l) - M * r**3 / (l * l) - M * M / 4


def test_x_plus_root(unit_bh):
    r_plus, x_plus = pot.inner_cutoff_x_plus(unit_bh)
    assert abs(_g(r_plus, 1.0, 1.0)) < 1e-10 * r_plus**4
    assert _g(2 * r_plus, 1.0, 1.0) > 0
    oracle = brentq(lambda r: r**4 / 4 - r**3 - 0.25, 3.5, 5.0, xtol=1e-14)
    assert r_plus == pytest.approx(oracle, rel=1e-12)
    assert x_plus == pytest.approx(geo.tortoise_from_radius(r_plus, unit_bh), abs=1e-11)


def test_x_plus_scaling():
    p1 = SpacetimeParams(0.3, 1.0, 2.0, 0.1)
    p2 = SpacetimeParams(0.6, 2.0, 1.0, 0.1)
    assert pot.inner_cutoff_x_plus(p2)[0] == pytest.approx(2 * pot.inner_cutoff_x_plus(p1)[0], rel=1e-12)


def test_lemma_inequality_beyond_r_plus(work):
    r_plus, _ = pot.inner_cutoff_x_plus(work)
    r = r_plus * np.geomspace(1.0 + 1e-9, 1e4, 500)
    F = geo.metric_F(r, work)
    dF = geo.metric_F_prime(r, work)
    assert np.all(F / 4 - dF**2 / 16 >= -1e-12 * F)


def test_well_structure(work):
    _, x_plus = pot.inner_cutoff_x_plus(work)
    x = np.linspace(x_plus, -1e-6, 20000)
    A = pot.potential_A(x, work)
    dA, _ = pot.potential_derivatives(x, work)
    assert np.all(A**2 >= 1.0 - 1e-12)
    assert np.all(dA[x < -1e-6] < 0)


def test_horizon_decay_rate(unit_bh):
    x = np.linspace(-40, -20, 50)
    slope = np.polyfit(x, np.log(pot.potential_A(x, unit_bh)), 1)[0]
    kappa = geo.metric_F_prime(geo.horizon_radius(unit_bh).r_SAdS, unit_bh) / 2
    assert slope == pytest.approx(kappa, rel=0.05)
