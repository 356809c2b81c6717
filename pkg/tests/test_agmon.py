import math

import numpy as np
import pytest

from sads_dirac import agmon
from sads_dirac.dirac import RadialGrid, SpinorField
from sads_dirac.errors import ConfigurationError, NumericalError
from sads_dirac.quasimodes import assemble_restricted, find_E_plus, restricted_grid

from conftest import SWEEP_H


def test_config_nesting(work):
    cfg = agmon.agmon_config(work)
    assert cfg.x_plus < cfg.A1 < cfg.A2 < cfg.x_A_S
    assert cfg.T == pytest.approx(8.0)
    assert cfg.c == pytest.approx(2.0 / math.sqrt(agmon.lemma_k(8.0, 4.0, 1.0)))
    with pytest.raises(ConfigurationError):
        agmon.AgmonConfig(cfg.c, cfg.T, cfg.x_plus, cfg.A1, cfg.A1, cfg.x_A_S)
    with pytest.raises(ConfigurationError):
        agmon.agmon_config(work, fractions=(0.5, 0.5))


def test_weighted_norm_trivial():
    g = RadialGrid(-2.0, -0.01, 400)
    rng = np.random.default_rng(0)
    f = SpinorField(g, rng.normal(size=(g.n, 4)))
    assert agmon.weighted_norm(f, 1e12, 0.1) == pytest.approx(f.norm(), rel=1e-9)
    c, h = 1.0, 0.1
    mask = g.x**2 <= c * h * math.log(2)
    g_vals = np.where(mask[:, None], f.values, 0)
    fs = SpinorField(g, g_vals)
    assert agmon.weighted_norm(fs, c, h) <= 2 * fs.norm()


def test_weighted_norm_delta():
    g = RadialGrid(-2.0, -0.01, 198)
    j = int(np.argmin(np.abs(g.x + 1.0)))
    vals = np.zeros((g.n, 4))
    vals[j, 0] = 1.0
    f = SpinorField(g, vals)
    w = agmon.weighted_norm(f, 1.0, 0.1)
    assert w / f.norm() == pytest.approx(math.exp(g.x[j] ** 2 / 0.1), rel=1e-12)
    assert g.x[j] ** 2 / 0.1 == pytest.approx(10.0, rel=0.02)


def test_weighted_norm_guard():
    g = RadialGrid(-30.0, -0.01, 300)
    f = SpinorField(g, np.ones((g.n, 4)))
    with pytest.raises(NumericalError):
        agmon.weighted_norm(f, 1.0, 0.1)
    # above the guard but representable
    small = np.zeros((g.n, 4))
    small[g.x > -8.5, 0] = 1e-200
    assert math.isfinite(agmon.weighted_norm(SpinorField(g, small), 1.0, 0.1))


@pytest.fixture(scope="module")
def eig_h01(work):
    g = restricted_grid(work, 4000)
    ep = find_E_plus(work, g)
    return ep, assemble_restricted("P_plus", work, g)


def test_weighted_inequality_eigenvector(work, eig_h01):
    ep, P = eig_h01
    cfg = agmon.agmon_config(work)
    wc = agmon.check_weighted_inequality(ep.pair.vector, P, ep.value, cfg.c, work.h)
    assert wc.residual_term < 1e-6 * wc.norm
    assert 1.0 <= wc.C_implied < 10.0
    tight = agmon.check_weighted_inequality(ep.pair.vector, P, ep.value, 0.05, work.h)
    assert tight.C_implied > 100 * wc.C_implied


def test_weighted_inequality_random(work, eig_h01):
    ep, P = eig_h01
    rng = np.random.default_rng(5)
    f = SpinorField(P.grid, rng.normal(size=(P.grid.n, 4)))
    wc = agmon.check_weighted_inequality(f, P, ep.value, agmon.agmon_config(work).c, work.h)
    assert wc.residual_term > wc.norm
    assert wc.lhs <= wc.norm + wc.residual_term


def test_lemma_margin(work):
    for h in SWEEP_H:
        lm = agmon.lemma_margin(work.with_h(h))
        assert lm.holds and lm.ratio > 1
    assert not agmon.lemma_margin(work.with_h(0.1), delta=0.1).holds


def test_admissible_c(work):
    ps = [work.with_h(h) for h in SWEEP_H]
    c, c_margin, c_k = agmon.admissible_c(ps)
    k = agmon.lemma_k(agmon.default_T(work), 4.0, 1.0)
    assert 4.0 / c**2 <= k * (1 + 1e-12)
    assert c_margin <= c
    assert all(agmon.lemma_margin(p, quad_coeff=4.0 / c**2).holds for p in ps)


def test_forbidden_mass_sweep(work):
    records, fit = agmon.agmon_sweep(list(SWEEP_H), work)
    assert fit.epsilon > 0 and fit.r_squared > 0.9
    assert fit.C_ratio < 10
    assert fit.C_growth <= 0.1 * fit.epsilon
    assert all(r.mass_sigma1 < r.mass_sigma2 for r in records)
    shifted = agmon.agmon_config(work, fractions=(0.55, 0.75))
    _, fit2 = agmon.agmon_sweep(list(SWEEP_H), work, config=shifted)
    assert fit2.epsilon < fit.epsilon
