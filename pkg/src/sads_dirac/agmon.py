"""Agmon-type checks on the restricted problem.

* the pointwise lower bound ``A² - h|A'| - (1/l² + T h) - k x² > delta h``
  with ``k = delta / (4 l⁴ (T + 2 delta))``;
* the weighted estimate with weight ``exp(x²/(c h))``;
* exponential smallness of eigenvector mass in ``Sigma1 = [x_plus, A1)``.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import potentials
from .errors import ConfigurationError, NumericalError
from .model_spectrum import model_levels
from .quasimodes import assemble_restricted, default_S, find_E_plus, restricted_grid

DEFAULT_DELTA = 4.0
_LOG_GUARD = 600.0


@dataclass(frozen=True)
class AgmonConfig:
    """Weight scale ``c``, window ``T`` and the nested regions ``[x_plus, A1) ⋐ [x_plus, A2)``."""

    c: float
    T: float
    x_plus: float
    A1: float
    A2: float
    x_A_S: float

    def __post_init__(self):
        if not (self.c > 0 and self.T > 0):
            raise ConfigurationError("c and T must be positive")
        if not (self.x_plus < self.A1 < self.A2 < self.x_A_S):
            raise ConfigurationError(
                f"need x_plus < A1 < A2 < x_A(1/l^2+S), got {self.x_plus}, {self.A1}, {self.A2}, {self.x_A_S}")

    def sigma1(self, x):
        return (x >= self.x_plus) & (x < self.A1)

    def sigma2(self, x):
        return (x >= self.x_plus) & (x < self.A2)


def default_T(params):
    """``T = 2 alpha1 + 2``, so ``1/l² + T h`` lies above ``E2(h)`` for small ``h``."""
    return 2.0 * model_levels(params).alpha1 + 2.0


def lemma_k(T, delta, l):
    return delta / (4.0 * l**4 * (T + 2.0 * delta))


def agmon_config(params, c=None, T=None, delta=DEFAULT_DELTA, S=None, fractions=(0.3, 0.6)):
    """Default configuration; ``A1, A2`` are fractions of ``[x_plus, x_A(1/l² + S)]``."""
    _, x_plus = potentials.inner_cutoff_x_plus(params)
    S = default_S(params) if S is None else S
    x_as = potentials.turning_point_xA(1.0 / params.l**2 + S, params)
    T = default_T(params) if T is None else T
    if c is None:
        c = 2.0 / math.sqrt(lemma_k(T, delta / params.l**2, params.l))
    width = x_as - x_plus
    return AgmonConfig(c, T, x_plus, x_plus + fractions[0] * width, x_plus + fractions[1] * width, x_as)


# ---------------------------------------------------------------------------
# pointwise lemma
# ---------------------------------------------------------------------------

@dataclass
class LemmaMargin:
    h: float
    delta: float
    k: float
    x_right: float
    min_value: float
    argmin: float

    @property
    def margin(self):
        """``min M - delta h``; positive when the lemma holds."""
        return self.min_value - self.delta * self.h

    @property
    def ratio(self):
        return self.min_value / (self.delta * self.h)

    @property
    def holds(self):
        return self.margin > 0


def _lemma_grid(x_left, x_right, n=10_000, refine=4, end_fraction=0.05):
    base = np.linspace(x_left, x_right, n)
    span = end_fraction * (x_right - x_left)
    m = refine * int(n * end_fraction)
    left = np.linspace(x_left, x_left + span, m)
    right = np.linspace(x_right - span, x_right, m)
    return np.unique(np.concatenate([base, left, right]))


def lemma_margin(params, T=None, delta=DEFAULT_DELTA, quad_coeff=None, n=10_000):
    """Minimum of ``A² - h|A'| - (1/l² + T h) - k x²`` on ``[x_plus, x_A(1/l² + (T + 2 delta) h)]``.

    ``delta`` is given in units of ``1/l²``.  ``quad_coeff`` replaces ``k``
    (used for the weight-admissibility check, where ``k -> 4/c²``).
    """
    T = default_T(params) if T is None else T
    d = delta / params.l**2
    h = params.h
    k = lemma_k(T, d, params.l) if quad_coeff is None else quad_coeff
    _, x_plus = potentials.inner_cutoff_x_plus(params)
    x_right = potentials.turning_point_xA(1.0 / params.l**2 + (T + 2 * d) * h, params)
    x = _lemma_grid(x_plus, x_right, n)
    gap = potentials.well_gap(x, params)
    dA, _ = potentials.potential_derivatives(x, params)
    vals = gap - h * np.abs(dA) - T * h - k * x**2
    i = int(np.argmin(vals))
    return LemmaMargin(h, d, k, x_right, float(vals[i]), float(x[i]))


def admissible_c(params_list, T=None, delta=DEFAULT_DELTA, c_hi=1e4):
    """Smallest weight scale ``c`` for which the lemma survives ``k -> 4/c²``.

    The bisection is run on the lemma margin over all ``params_list``; the
    result is raised to at least ``2/sqrt(k)`` so that ``4/c² <= k`` holds.

    Returns
    -------
    c, c_margin, c_k : float
    """
    p0 = params_list[0]
    T = default_T(p0) if T is None else T
    k = lemma_k(T, delta / p0.l**2, p0.l)
    c_k = 2.0 / math.sqrt(k)

    def ok(c):
        return all(lemma_margin(p, T, delta, quad_coeff=4.0 / c**2, n=2000).holds for p in params_list)

    if not ok(c_hi):
        raise NumericalError("lemma fails even for a flat weight")
    lo, hi = 1e-3, c_hi
    if ok(lo):
        c_margin = lo
    else:
        for _ in range(60):
            mid = math.sqrt(lo * hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
            if hi / lo < 1 + 1e-6:
                break
        c_margin = hi
    return max(c_margin, c_k), c_margin, c_k


# ---------------------------------------------------------------------------
# weighted estimates
# ---------------------------------------------------------------------------

def weighted_norm(fld, c, h):
    """``||exp(x²/(c h)) phi||`` in the grid norm, overflow-guarded in log space."""
    x = fld.grid.x
    expo2 = 2.0 * x**2 / (c * h)
    dens = fld.grid.weights * fld.density()
    top = float(expo2.max())
    if top <= _LOG_GUARD:
        return float(math.sqrt(np.sum(dens * np.exp(expo2))))
    scaled = float(np.sum(dens * np.exp(expo2 - top)))
    if scaled == 0:
        return 0.0
    log_val = 0.5 * (top + math.log(scaled))
    if log_val > 709.0:
        raise NumericalError(f"weighted norm overflows: max exponent {0.5 * top:.6g}")
    return float(math.exp(log_val))


@dataclass
class WeightedCheck:
    lhs: float
    norm: float
    residual_term: float
    C_implied: float


def check_weighted_inequality(fld, P_op, E, c, h):
    """Both sides of ``||e^{x²/ch} phi|| <= C (||phi|| + h^{-1} ||e^{x²/ch}(P - E) phi||)``.

    ``C_implied`` is the smallest constant that makes the inequality hold.
    """
    lhs = weighted_norm(fld, c, h)
    res = P_op.apply(fld) - fld * E
    rterm = weighted_norm(res, c, h) / h
    nrm = fld.norm()
    return WeightedCheck(lhs, nrm, rterm, lhs / (nrm + rterm))


# ---------------------------------------------------------------------------
# forbidden-region mass
# ---------------------------------------------------------------------------

@dataclass
class AgmonRecord:
    h: float
    E: float
    mass_sigma1: float
    mass_sigma2: float
    C_implied: float
    lemma_margin: float
    lemma_ratio: float
    noise_limited: bool
    in_window: bool


@dataclass
class AgmonFit:
    epsilon: float
    r_squared: float
    C_growth: float
    C_ratio: float
    used: list


def forbidden_region_mass(fld, config):
    """``(||phi||_{Sigma1}, ||phi||_{Sigma2})`` for a unit-norm field."""
    if not config.A1 < config.A2:
        raise ConfigurationError("Sigma1 must be strictly inside Sigma2")
    x = fld.grid.x
    return fld.norm(config.sigma1(x)), fld.norm(config.sigma2(x))


def _fit(inv_h, y):
    slope, icpt = np.polyfit(inv_h, y, 1)
    pred = slope * inv_h + icpt
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return slope, r2


def agmon_sweep(h_list, params, n=4000, x_cut=-1e-3, delta=DEFAULT_DELTA, config=None, noise=1e-12):
    """Per-``h`` Agmon records for the ``P_plus`` eigenvector at ``E_plus``, and the fits.

    ``epsilon`` is minus the slope of ``log mass_sigma1`` against ``1/h``;
    ``C_growth`` is the slope of ``log C_implied`` against ``1/h``.
    ``in_window`` records whether ``E_plus < 1/l² + T h`` at that ``h``.
    """
    records = []
    for h in h_list:
        p = params.with_h(h)
        cfg = config or agmon_config(p, delta=delta)
        grid = restricted_grid(p, n, x_cut)
        ep = find_E_plus(p, grid)
        fld = ep.pair.vector.normalized()
        P = assemble_restricted("P_plus", p, grid)
        m1, m2 = forbidden_region_mass(fld, cfg)
        wc = check_weighted_inequality(fld, P, ep.value, cfg.c, h)
        lm = lemma_margin(p, cfg.T, delta)
        records.append(AgmonRecord(h, ep.value, m1, m2, wc.C_implied, lm.margin, lm.ratio, m1 < noise,
                                   ep.value < 1.0 / p.l**2 + cfg.T * h))
    used = [r for r in records if not r.noise_limited]
    if len(used) < 3:
        raise NumericalError("fewer than 3 records above solver noise")
    inv_h = np.array([1.0 / r.h for r in used])
    slope, r2 = _fit(inv_h, np.log([r.mass_sigma1 for r in used]))
    growth, _ = _fit(inv_h, np.log([r.C_implied for r in used]))
    cs = [r.C_implied for r in used]
    return records, AgmonFit(float(-slope), float(r2), float(growth), max(cs) / min(cs), used)
