import math

import numpy as np
import pytest

from sads_dirac import SpacetimeParams
from sads_dirac import evolution as ev
from sads_dirac.dirac import RadialGrid, SpinorField, assemble_H, eigen_solve
from sads_dirac.errors import ConfigurationError, PhysicsCheckError
from sads_dirac.quasimodes import SweepFit, build_quasimode, restricted_grid


def test_window_validation():
    with pytest.raises(ConfigurationError):
        ev.CompactWindow(-1.0, -2.0)
    with pytest.raises(ConfigurationError):
        ev.CompactWindow(-1.0, 0.0)
    g = RadialGrid(-2.0, -0.5, 50)
    with pytest.raises(ConfigurationError):
        ev.CompactWindow(-3.0, -1.0).mask(g)


def test_local_energy_trivial():
    g = RadialGrid(-2.0, -0.5, 50)
    rng = np.random.default_rng(2)
    f = SpinorField(g, rng.normal(size=(g.n, 4)))
    whole = ev.CompactWindow(g.x[0] - g.dx / 2, g.x[-1] + g.dx / 2)
    assert ev.local_energy(f, whole) == pytest.approx(f.norm())
    vals = f.values.copy()
    vals[g.x > -1.5] = 0
    assert ev.local_energy(SpinorField(g, vals), ev.CompactWindow(-1.4, -0.6)) == 0.0


@pytest.fixture(scope="module")
def small_problem():
    p = SpacetimeParams(0.05, 1.0, 2.0, 0.2)
    g = RadialGrid(-4.0, -1e-2, 400)
    H = assemble_H(g, p)
    return p, g, H


def test_identity_at_zero(small_problem):
    _, g, H = small_problem
    f = SpinorField(g, np.random.default_rng(0).normal(size=(g.n, 4)))
    out = ev.evolve(ev.EvolutionState(f), H, 0.0, 0.1)
    assert np.array_equal(out.field.values, f.values)


def test_eigenvector_phase(small_problem):
    _, g, H = small_problem
    pr = eigen_solve(H, 1.2, k=1)[0]
    v = pr.vector
    dt, t = 0.01, 2.0
    out = ev.evolve(ev.EvolutionState(v), H, t, dt, check=False)
    n = round(t / dt)
    assert abs(out.field.inner(v)) >= 1 - 1e-9
    phase = np.angle(v.inner(out.field))
    expect = math.remainder(n * dt * ev.cayley_phase(pr.value, dt), 2 * math.pi)
    assert abs(math.remainder(phase - expect, 2 * math.pi)) < 1e-8
    lam_eff = ev.cayley_phase(pr.value, dt)
    assert abs(lam_eff - pr.value) <= dt**2 / 12 * abs(pr.value) ** 3 + 1e-12


def test_norm_and_energy_conservation(small_problem):
    _, g, H = small_problem
    rng = np.random.default_rng(4)
    f = SpinorField(g, np.exp(-((g.x + 1.0) ** 2) / 0.05)[:, None] * rng.normal(size=(1, 4)))
    e0 = H.apply(f).inner(f).real
    out = ev.Evolver(H, 0.01).advance(ev.EvolutionState(f), 10_000, record_every=1000)
    assert np.max(np.abs(np.array(out.norms) / f.norm() - 1)) < 1e-8
    assert abs(H.apply(out.field).inner(out.field).real - e0) < 1e-8 * abs(e0)
    assert ev.unitarity_drift(H, f, 0.01, 200) < 1e-11


def test_dt_precondition(small_problem):
    _, g, H = small_problem
    f = SpinorField(g, np.random.default_rng(1).normal(size=(g.n, 4)))
    with pytest.raises(ConfigurationError):
        ev.evolve(ev.EvolutionState(f), H, 10.0, 5.0)
    with pytest.raises(ConfigurationError):
        ev.Evolver(H, 0.0)


def test_zero_data(small_problem):
    _, g, H = small_problem
    out = ev.Evolver(H, 0.01).advance(ev.EvolutionState(SpinorField.zeros(g)), 100,
                                      K=ev.CompactWindow(-3.0, -1.0), record_every=10)
    assert np.all(np.array(out.local) == 0) and np.all(np.array(out.norms) == 0)


@pytest.fixture(scope="module")
def qm_h015():
    p = SpacetimeParams(0.05, 1.0, 2.0, 0.15)
    return build_quasimode(p, restricted_grid(p, 4000))


def test_short_decay_experiment(qm_h015):
    exp_ = ev.decay_experiment(qm_h015, t_max=5.0, count=5)
    assert exp_.bound_ok and exp_.duhamel_ok
    assert exp_.lam**2 >= 0.99 - 1e-12
    assert abs(exp_.local[0] - exp_.lam) <= 0.01 * exp_.lam
    assert len(exp_.times) == 5


def test_certificate_lambda_below_h(qm_h015):
    fit = SweepFit(1.18, 0.0, 1.0, 25.0, [], [])
    x = qm_h015.phi_h.grid.x
    K = ev.CompactWindow(-1.3, -1.25)
    with pytest.raises(ConfigurationError):
        ev.log_bound_certificate(qm_h015.params, fit, K)
    assert x[0] < -1.3


def test_certificate_analytic_branch(qm_h015):
    fit = SweepFit(3.0, 0.0, 1.0, 25.0, [], [])
    cert = ev.log_bound_certificate(qm_h015.params, fit)
    assert cert.branch == "analytic"
    assert cert.t_h / cert.dt > ev.FEASIBLE_STEPS
    assert cert.duhamel_ok
    assert not cert.envelope_ok and not cert.passed
    with pytest.raises(PhysicsCheckError):
        ev.require(cert)
