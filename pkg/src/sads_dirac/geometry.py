"""Exterior geometry of Schwarzschild-AdS: the lapse F, the horizon and the
tortoise coordinate.

The cubic ``r**3 + l**2 r - 2 M l**2`` has a single real root ``a = r_SAdS``
and factors as ``(r - a)(r**2 + a r + b)`` with ``b = l**2 + a**2``.  Writing
``u = r - a`` gives

    F(r) = u (r**2 + a r + b) / (l**2 r),

which is free of cancellation near the horizon.  Integrating ``1/F`` in
closed form (partial fractions) yields ``x(r)`` with ``x -> 0`` at infinity;
an independent quadrature route is kept as a cross-check.
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import kernels

#: reference radius (in units of l) where the quadrature hands over to the tail series
R_REF_FACTOR = 1.0e6


@dataclass(frozen=True)
class SpacetimeParams:
    """Black-hole mass ``M``, AdS radius ``l``, field mass ``m`` and semiclassical ``h``.

    ``h = 1/(s + 1/2)`` for angular index ``s``; it is an input here.
    """

    M: float
    l: float
    m: float
    h: float

    def __post_init__(self):
        for name in ("M", "l", "m", "h"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.m * self.l <= 1.0:
            raise ValueError(f"need m*l > 1, got m*l = {self.m * self.l}")

    @property
    def ml(self):
        return self.m * self.l

    def with_h(self, h):
        return SpacetimeParams(self.M, self.l, self.m, h)


@dataclass(frozen=True)
class HorizonData:
    r_SAdS: float
    p_plus: float
    p_minus: float


@dataclass(frozen=True)
class _Consts:
    a: float
    b: float
    w: float
    alpha: float
    fp_horizon: float
    c_horizon: float


def _cbrt(v):
    return math.copysign(abs(v) ** (1.0 / 3.0), v)


def horizon_radius(params):
    """Real root of ``F`` as ``p_plus + p_minus`` (real cube roots).

    Returns
    -------
    HorizonData
    """
    return _horizon(params.M, params.l)


def _horizon(M, l):
    root = math.sqrt(M * M * l**4 + l**6 / 27.0)
    p_plus = _cbrt(M * l * l + root)
    p_minus = _cbrt(M * l * l - root)
    a = p_plus + p_minus
    # one Newton polish on the cubic; the sum of cube roots can lose a few ulps
    c = a**3 + l * l * a - 2.0 * M * l * l
    a -= c / (3.0 * a * a + l * l)
    return HorizonData(r_SAdS=a, p_plus=p_plus, p_minus=p_minus)


@lru_cache(maxsize=256)
def _consts(M, l):
    a = _horizon(M, l).r_SAdS
    b = l * l + a * a
    w = math.sqrt(4.0 * b - a * a)
    alpha = a / (3.0 * a * a + l * l)
    fp = 2.0 * (M / (a * a) + a / (l * l))
    s_ref = math.log(1e-8 * a)
    x_ref = float(kernels.tortoise_closed_form(math.exp(s_ref), a, b, w, alpha, l))
    return _Consts(a, b, w, alpha, fp, x_ref - s_ref / fp)


def constants(params):
    """Cached horizon-factorization constants for ``(M, l)``."""
    return _consts(params.M, params.l)


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise ValueError("radius must be positive")
    return r


def metric_F(r, params):
    """``F(r) = 1 - 2M/r + r**2/l**2`` (array friendly)."""
    r = _check_r(r)
    out = 1.0 - 2.0 * params.M / r + r * r / params.l**2
    return out if out.ndim else float(out)


def metric_F_prime(r, params):
    """``dF/dr = 2 (M/r**2 + r/l**2)``."""
    r = _check_r(r)
    out = 2.0 * (params.M / (r * r) + r / params.l**2)
    return out if out.ndim else float(out)


def metric_F_factored(r, params):
    """``F`` evaluated through the horizon factorization (accurate near ``r_SAdS``)."""
    r = _check_r(r)
    c = constants(params)
    u = r - c.a
    out = u * (r + c.a + c.b / r) / params.l**2
    return out if out.ndim else float(out)


def _tail(R, params):
    # int_R^inf dr / F  for R >> l
    l2 = params.l**2
    return l2 / R - l2 * l2 / (3.0 * R**3) + params.M * l2 * l2 / (2.0 * R**4)


def _tortoise_quad(r, params, rtol):
    c = constants(params)
    l2 = params.l**2
    R = R_REF_FACTOR * params.l
    if r >= R:
        return -_tail(r, params), 0.0

    def integrand(s):
        rr = c.a + math.exp(s)
        return l2 / (rr + c.a + c.b / rr)

    s0 = math.log(r - c.a)
    s1 = math.log(R - c.a)
    # split at the scale of the horizon and of l, where the integrand bends
    knots = sorted({s0, s1, *[k for k in (math.log(c.a), math.log(params.l)) if s0 < k < s1]})
    total = 0.0
    err = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        val, e = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=rtol, limit=200)
        total += val
        err += e
    return -(total + _tail(R, params)), err


def tortoise_from_radius(r, params, method="quadrature", rtol=1e-13, return_error=False):
    """Tortoise coordinate ``x(r) = -int_r^inf dρ / F(ρ)``.

    Parameters
    ----------
    r : float or array_like
        Radii strictly outside the horizon.
    method : {"quadrature", "closed"}
        ``"quadrature"`` integrates ``1/F`` in the log-gap variable up to
        ``R_ref = 1e6 l`` and adds the tail ``l²/R - l⁴/(3R³) + M l⁴/(2R⁴)``.
        ``"closed"`` evaluates the partial-fraction antiderivative.
    rtol : float
        Relative tolerance handed to the quadrature.
    return_error : bool
        Also return the accumulated quadrature error estimate.
    """
    r = _check_r(r)
    c = constants(params)
    if np.any(~(r > c.a)):
        raise ValueError("radius must lie outside the horizon r_SAdS")
    if method == "closed":
        x = kernels.tortoise_closed_form(r - c.a, c.a, c.b, c.w, c.alpha, params.l)
        err = np.zeros_like(x)
    elif method == "quadrature":
        flat = [_tortoise_quad(float(v), params, rtol) for v in r.ravel()]
        x = np.array([f[0] for f in flat]).reshape(r.shape)
        err = np.array([f[1] for f in flat]).reshape(r.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    if x.ndim == 0:
        x, err = float(x), float(err)
    return (x, err) if return_error else x


def tortoise_from_gap(u, params):
    """Closed-form ``x`` as a function of ``u = r - r_SAdS`` (keeps precision at the horizon)."""
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise ValueError("gap r - r_SAdS must be positive")
    c = constants(params)
    x = kernels.tortoise_closed_form(u, c.a, c.b, c.w, c.alpha, params.l)
    return x if x.ndim else float(x)


def radial_profile(x, params, accelerated=None):
    """Rows ``(r, r - r_SAdS, F, A, B, A', B')`` at tortoise points ``x < 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x < 0)):
        raise ValueError("tortoise coordinate must be negative")
    c = constants(params)
    return kernels.radial_profile(x.ravel(), params.M, params.l, c.a, c.b, c.w, c.alpha,
                                  c.fp_horizon, c.c_horizon, accelerated=accelerated).reshape((7,) + x.shape)


def radius_from_tortoise(x, params, accelerated=None):
    """Inverse of the tortoise map: the unique ``r > r_SAdS`` with ``x(r) = x``.

    Solved by safeguarded Newton iteration in ``ln(r - r_SAdS)`` inside a
    bisection bracket.  Points so deep that ``r - r_SAdS`` would underflow
    are clamped to a gap of ``exp(-740)``.
    """
    prof = radial_profile(x, params, accelerated)
    r = prof[0]
    return r if r.ndim else float(r)


def gap_from_tortoise(x, params, accelerated=None):
    """``r(x) - r_SAdS`` without the rounding of forming ``r`` first."""
    prof = radial_profile(x, params, accelerated)
    u = prof[1]
    return u if u.ndim else float(u)
