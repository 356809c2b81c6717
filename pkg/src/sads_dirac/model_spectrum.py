"""Comparison operator with a harmonic plus inverse-square well.

``P_tilde = -h² d²/dx² + (1/l² + x²/l⁴) - i h g1 g2 (x/l⁴)(1/l² + x²/l⁴)^{-1/2}
+ h² (m² l²/x² + i g1 ml/x²)``.

Conjugating ``i g1`` by the involution ``K`` diagonalizes it to
``diag(-1, 1, 1, -1)``, which splits the (frozen) upper-bound operator into
the two scalar channels

    L_c = -h² d²/dx² + 1/l² + beta² x² + h² c / x²,   beta² = 1/l⁴ + h/(2 l⁶),

with ``c = ml(ml - 1)`` (components 1, 4) and ``c = ml(ml + 1)`` (components
2, 3).  Their ground states are ``|x|^p exp(-beta x²/(2h))`` with ``p = ml``
and ``p = alpha1``, at levels ``E1`` and ``E2``.
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dirac import (EigenPair, RadialGrid, SpinorField, assemble_P, eigen_solve,  # noqa: F401
                    gamma_set)


@dataclass(frozen=True)
class ModelLevels:
    h: float
    alpha1: float
    beta: float
    E0: float
    E1: float
    E2: float


def alpha1(ml):
    """Larger root of ``a(a - 1) = ml(ml + 1)``."""
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * ml * (ml + 1.0)))


def model_levels(params):
    """Closed-form ``E0 = 1/l² - h/2``, ``E1``, ``E2`` and ``alpha1``."""
    l, h = params.l, params.h
    a1 = alpha1(params.ml)
    beta = math.sqrt(1.0 / l**4 + h / (2.0 * l**6))
    return ModelLevels(h=h, alpha1=a1, beta=beta, E0=1.0 / l**2 - h / 2.0,
                       E1=1.0 / l**2 + (2.0 * params.ml + 1.0) * beta * h,
                       E2=1.0 / l**2 + (2.0 * a1 + 1.0) * beta * h)


@dataclass(frozen=True)
class KBasis:
    """``K = Kint/sqrt(2)`` with integer ``Kint``; ``K² = I`` and ``g1 = K D K``."""

    Kint: np.ndarray
    D: np.ndarray

    @property
    def K(self):
        return self.Kint / math.sqrt(2.0)

    def conjugate(self, mat):
        """``K mat K`` evaluated as ``Kint mat Kint / 2`` (exact for integer-valued input)."""
        return self.Kint @ mat @ self.Kint / 2.0


@lru_cache(maxsize=1)
def k_basis():
    kint = np.array([[1, 0, 1, 0], [0, 1, 0, 1], [1, 0, -1, 0], [0, 1, 0, -1]])
    d = np.diag([1j, -1j, -1j, 1j])
    kint.setflags(write=False)
    d.setflags(write=False)
    return KBasis(kint, d)


def channel_signs():
    """Diagonal of ``K (i g1) K``: the sign multiplying ``ml/x²`` per component."""
    kb = k_basis()
    return np.real(np.diag(kb.conjugate(1j * gamma_set().gamma1)))


def _exponent(which, params):
    if which == "psi1":
        return params.ml
    if which == "psi2":
        return alpha1(params.ml)
    raise ValueError("which must be 'psi1' or 'psi2'")


def model_eigenfunction(which, x, params):
    """Model ground state ``psi1`` (exponent ``ml``) or ``psi2`` (exponent ``alpha1``).

    Uses ``(x/h^{1/2})^p := (|x|/h^{1/2})^p`` so the function is real and
    positive.  If ``x`` is a :class:`RadialGrid` the values at its interior
    nodes are returned normalized in the grid inner product; for a plain
    array the printed ``h^{-1/4}`` prefactor is kept.
    """
    grid = x if isinstance(x, RadialGrid) else None
    xs = grid.x if grid is not None else np.asarray(x, dtype=float)
    if np.any(~(xs < 0)):
        raise ValueError("model eigenfunctions are evaluated at x < 0")
    p = _exponent(which, params)
    lv = model_levels(params)
    h = params.h
    logv = -0.25 * math.log(h) + p * np.log(np.abs(xs) / math.sqrt(h)) - lv.beta * xs**2 / (2.0 * h)
    vals = np.exp(logv)
    if grid is not None:
        vals = vals / math.sqrt(np.sum(grid.weights * vals**2))
    return vals


def model_peak(which, params):
    """``|x|`` where the model eigenfunction is largest: ``(p h / beta)^{1/2}``."""
    return math.sqrt(_exponent(which, params) * params.h / model_levels(params).beta)


def trial_spinor(grid, params):
    """``K (psi1, psi2, psi2, psi1)``, normalized: the model vector at level ``E2``."""
    p1 = model_eigenfunction("psi1", grid, params)
    p2 = model_eigenfunction("psi2", grid, params)
    vals = np.column_stack([p1, p2, p2, p1]) @ k_basis().K.T
    return SpinorField(grid, vals).normalized()


def assemble_model_P_tilde(grid, params, check=True):
    """Discrete comparison operator on ``grid``."""
    return assemble_P(grid, params, kind="P_tilde", check=check)


def _channel_coefficient(which, params):
    ml = params.ml
    return ml * (ml - 1.0) if which == "psi1" else ml * (ml + 1.0)


def channel_apply(which, grid, params, values, left=0.0, right=0.0):
    """Scalar channel operator applied to node values with given end values."""
    lv = model_levels(params)
    h = params.h
    x = grid.x
    ext = np.concatenate([[left], values, [right]])
    d = grid.cells
    flux = np.diff(ext) / d
    kin = -h * h * np.diff(flux) / grid.weights
    pot = 1.0 / params.l**2 + lv.beta**2 * x**2 + h * h * _channel_coefficient(which, params) / x**2
    return kin + pot * values


def _channel_residual_once(which, grid, params, energy):
    psi_all = model_eigenfunction(which, grid.edges, params)
    inner = psi_all[1:-1]
    res = channel_apply(which, grid, params, inner, psi_all[0], psi_all[-1]) - energy * inner
    w = grid.weights
    return math.sqrt(np.sum(w * res**2) / np.sum(w * inner**2))


def channel_residual(which, grid, params, energy=None):
    """Relative residual of the discrete channel equation and its observed order.

    ``psi`` is sampled on the grid including the two end nodes, so the
    truncation contributes only its true boundary values.  The residual is
    recomputed on the grid with half the spacing and the order is
    ``log2(res(dx)/res(dx/2))``.

    Returns
    -------
    residual, order, residual_fine : float
    """
    lv = model_levels(params)
    if energy is None:
        energy = lv.E1 if which == "psi1" else lv.E2
    _exponent(which, params)
    r1 = _channel_residual_once(which, grid, params, energy)
    r2 = _channel_residual_once(which, grid.refined(2), params, energy)
    return r1, math.log2(r1 / r2), r2


@dataclass
class BracketRecord:
    h: float
    E0: float
    E2: float
    upper: float
    E_tilde: float
    E_tilde_coarse: float
    slack: float
    lower_ok: bool
    upper_ok: bool

    @property
    def ok(self):
        return self.lower_ok and self.upper_ok


def eigenvalue_bracket(params, x_min=-3.0, x_cut=-1e-3, n=4000):
    """Lowest eigenvalue of discrete ``P_tilde`` against ``[E0, E2 + h/2]``.

    The slack is the change of the eigenvalue between ``n`` and ``2n + 1``
    interior nodes, an estimate of the ``O(dx²)`` discretization error.
    """
    l = params.l
    lv = model_levels(params)
    vals = []
    grid = RadialGrid(x_min * l, x_cut * l, n)
    for g in (grid, grid.refined(2)):
        op = assemble_model_P_tilde(g, params)
        vals.append(eigen_solve(op, lv.E0 - 1.0 / l**2, k=1)[0].value)
    slack = abs(vals[1] - vals[0])
    upper = lv.E2 + params.h / 2.0
    return BracketRecord(h=params.h, E0=lv.E0, E2=lv.E2, upper=upper, E_tilde=vals[1],
                         E_tilde_coarse=vals[0], slack=slack,
                         lower_ok=vals[1] >= lv.E0 - slack, upper_ok=vals[1] <= upper + slack)
