"""Radial potentials in the tortoise coordinate.

``A = F^{1/2}/r`` and ``B = F^{1/2}``, with derivatives from ``d/dx = F d/dr``:

    A' = F^{1/2} (3M - r) / r**3,        B' = F'(r) F^{1/2} / 2.

The well depth is handled through the exact identity
``A**2 - 1/l**2 = (r - 2M)/r**3`` so that turning points close to ``x = 0``
keep full relative precision.
"""
import math

import numpy as np
from scipy import optimize

from . import geometry


def _profile(x, params):
    x = np.asarray(x, dtype=float)
    if np.any(~(x < 0)):
        raise ValueError("potentials are defined for x < 0 only")
    return geometry.radial_profile(x, params)


def _ret(v):
    return v if np.ndim(v) else float(v)


def potential_A(x, params):
    """``A(x) = F(r(x))^{1/2} / r(x)``."""
    return _ret(_profile(x, params)[3])


def potential_B(x, params):
    """``B(x) = F(r(x))^{1/2}``."""
    return _ret(_profile(x, params)[4])


def potential_derivatives(x, params):
    """Analytic ``(A'(x), B'(x))``."""
    p = _profile(x, params)
    return _ret(p[5]), _ret(p[6])


def well_gap(x, params):
    """``A(x)**2 - 1/l**2`` computed as ``(r - 2M)/r**3``."""
    r = _profile(x, params)[0]
    return _ret((r - 2.0 * params.M) / r**3)


class PotentialProfile:
    """Bundle of ``A, B, A', B'`` for one parameter set.

    Examples
    --------
    >>> from sads_dirac.geometry import SpacetimeParams
    >>> prof = PotentialProfile(SpacetimeParams(1.0, 1.0, 2.0, 0.1))
    >>> round(prof.A(geometry.tortoise_from_radius(2.0, prof.params)), 12)
    1.0
    """

    def __init__(self, params):
        self.params = params

    def table(self, x):
        """Array of rows ``(x, r, A, B, A', B', A**2)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = _profile(x, self.params)
        return np.column_stack([x, p[0], p[3], p[4], p[5], p[6], p[3] ** 2])

    def A(self, x):
        return potential_A(x, self.params)

    def B(self, x):
        return potential_B(x, self.params)

    def dA(self, x):
        return potential_derivatives(x, self.params)[0]

    def dB(self, x):
        return potential_derivatives(x, self.params)[1]


def _g_quartic(r, M, l):
    return r**4 / (4.0 * l * l) - M * r**3 / (l * l) - M * M / 4.0


def inner_cutoff_x_plus(params):
    """Inner cutoff ``(r_plus, x_plus)``.

    ``r_plus`` is the largest real root of
    ``g(r) = r**4/(4 l**2) - M r**3/l**2 - M**2/4``, beyond which
    ``F/(4 l**2) - F'**2/16 >= 0``.  The cutoff is then moved right, if
    needed, so that ``A' < 0`` on ``[x_plus, 0)``; since ``A'`` changes sign
    at the photon sphere ``r = 3M`` this only matters if ``r_plus < 3M``.
    """
    M, l = params.M, params.l
    roots = np.roots([1.0 / (4 * l * l), -M / (l * l), 0.0, 0.0, -M * M / 4.0])
    real = roots[np.abs(roots.imag) <= 1e-8 * np.abs(roots)].real
    r0 = float(real.max())
    # polish on a sign-change bracket
    lo, hi = r0 * (1 - 1e-6), r0 * (1 + 1e-6)
    while _g_quartic(lo, M, l) > 0:
        lo *= 0.99
    while _g_quartic(hi, M, l) < 0:
        hi *= 1.01
    r_plus = optimize.brentq(_g_quartic, lo, hi, args=(M, l), xtol=1e-15 * r0, rtol=1e-15)
    grid = r_plus * np.geomspace(1.0 + 1e-9, 1e6, 400)
    if np.any(_g_quartic(grid, M, l) < 0):  # pragma: no cover - impossible for a quartic with positive lead
        raise ArithmeticError("quartic is not nonnegative beyond its largest root")
    r_plus = max(r_plus, 3.0 * M)
    return r_plus, geometry.tortoise_from_radius(r_plus, params, method="closed")


def barrier_height(params):
    """``A**2(x_plus)``, the largest admissible squared energy."""
    r_plus, _ = inner_cutoff_x_plus(params)
    return 1.0 / params.l**2 + (r_plus - 2.0 * params.M) / r_plus**3


def turning_point_xA(E, params):
    """Well-side turning point: the root of ``A(x)**2 = E`` nearest to 0.

    Parameters
    ----------
    E : float
        Squared energy with ``1/l**2 < E < A**2(x_plus)``.

    Raises
    ------
    ValueError
        If ``E <= 1/l**2`` (no turning point) or ``E`` reaches the barrier.
    """
    eps = E - 1.0 / params.l**2
    if not eps > 0:
        raise ValueError("no turning point for E <= 1/l^2")
    r_plus, _ = inner_cutoff_x_plus(params)
    M = params.M
    if eps >= (r_plus - 2 * M) / r_plus**3:
        raise ValueError("E exceeds the barrier value A^2(x_plus)")

    # (r - 2M)/r^3 is decreasing for r > 3M; solve in log r for uniform accuracy
    def f(t):
        r = math.exp(t)
        return (r - 2 * M) / r**3 - eps

    hi = max(1.0 / math.sqrt(eps), r_plus * (1 + 1e-12))
    t = optimize.brentq(f, math.log(r_plus), math.log(hi), xtol=1e-16, rtol=1e-15, maxiter=500)
    return geometry.tortoise_from_radius(math.exp(t), params, method="closed")
