"""Restricted operators on ``[x_plus, 0)``, the eigenvalue ``E_plus`` near
``E2`` and the cutoff quasimode of the full-line operator.

A centered first difference has exact fermion doubling: every discrete
``H_plus`` eigenvalue comes with a degenerate partner carried by a
sawtooth mode.  The physical eigenvector is recovered by projecting the
``P_plus`` eigenspace at ``E_plus`` onto the ``H_plus`` eigenspace at
``+sqrt(E_plus)`` and keeping the dominant direction, which is an exact
``H_plus`` eigenvector that is also smooth.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import potentials
from .dirac import RadialGrid, SpinorField, assemble_H, assemble_P, eigen_solve
from .errors import ConfigurationError, NumericalError
from .model_spectrum import model_levels, trial_spinor

DEFAULT_BAND = (0.1, 0.4)


# ---------------------------------------------------------------------------
# cutoff function
# ---------------------------------------------------------------------------

def _bump(t):
    pos = t > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, t, 1.0)), 0.0)


def _bump_prime(t):
    pos = t > 0
    tt = np.where(pos, t, 1.0)
    return np.where(pos, np.exp(-1.0 / tt) / tt**2, 0.0)


@dataclass(frozen=True)
class Cutoff:
    """Smooth step: 0 left of ``lo``, 1 right of ``hi``, ``C^inf`` in between."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError("cutoff band must have lo < hi")

    def __call__(self, x):
        t = np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        a, b = _bump(t), _bump(1.0 - t)
        return a / (a + b)

    def derivative(self, x):
        t = np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        a, b = _bump(t), _bump(1.0 - t)
        da, db = _bump_prime(t), _bump_prime(1.0 - t)
        inside = (t > 0) & (t < 1)
        return np.where(inside, (da * b + a * db) / (a + b) ** 2, 0.0) / (self.hi - self.lo)


@dataclass(frozen=True)
class CutoffGeometry:
    x_plus: float
    S: float
    x_A_S: float
    A_cut: float
    band: tuple
    chi: Cutoff


def default_S(params):
    """Half of the barrier height above ``1/l²``."""
    return 0.5 * (potentials.barrier_height(params) - 1.0 / params.l**2)


def cutoff_geometry(params, S=None, band=DEFAULT_BAND):
    """Place the cutoff transition inside the forbidden region.

    ``A_cut`` is the midpoint of ``[x_plus, x_A(1/l² + S)]`` and the
    transition occupies the fractions ``band`` of ``[x_plus, A_cut]``.
    """
    _, x_plus = potentials.inner_cutoff_x_plus(params)
    if S is None:
        S = default_S(params)
    if not (0 < S and 1.0 / params.l**2 + S < potentials.barrier_height(params)):
        raise ConfigurationError("need S > 0 with 1/l^2 + S below the barrier")
    if not (0 <= band[0] < band[1] <= 1):
        raise ConfigurationError("band fractions must satisfy 0 <= lo < hi <= 1")
    x_as = potentials.turning_point_xA(1.0 / params.l**2 + S, params)
    a_cut = 0.5 * (x_plus + x_as)
    width = a_cut - x_plus
    chi = Cutoff(x_plus + band[0] * width, x_plus + band[1] * width)
    return CutoffGeometry(x_plus, S, x_as, a_cut, tuple(band), chi)


# ---------------------------------------------------------------------------
# restricted problem
# ---------------------------------------------------------------------------

def restricted_grid(params, n=4000, x_cut=-1e-3):
    """Uniform grid on ``[x_plus, x_cut]``; ``x_cut`` in units of ``l``."""
    _, x_plus = potentials.inner_cutoff_x_plus(params)
    return RadialGrid(x_plus, x_cut * params.l, n)


def assemble_restricted(kind, params, grid):
    """``P_plus`` or ``H_plus`` with Dirichlet ends at ``x_plus`` and ``x_cut``."""
    if kind == "P_plus":
        return assemble_P(grid, params, kind="P_plus")
    if kind == "H_plus":
        return assemble_H(grid, params, kind="H_plus")
    raise ValueError("kind must be 'P_plus' or 'H_plus'")


@dataclass
class EPlusResult:
    pair: object
    E2: float
    distance: float
    flagged: bool
    partner: object = None

    @property
    def value(self):
        return self.pair.value


def find_E_plus(params, grid=None, tol=1e-9):
    """Eigenpair of ``P_plus`` nearest ``E2(h)``.

    ``flagged`` is set when ``|E_plus - E2| > 10 h^{1/2} / l²``.
    """
    grid = grid or restricted_grid(params)
    op = assemble_restricted("P_plus", params, grid)
    E2 = model_levels(params).E2
    pairs = eigen_solve(op, E2, k=2, tol=tol)
    dist = abs(pairs[0].value - E2)
    return EPlusResult(pairs[0], E2, dist, dist > 10 * math.sqrt(params.h) / params.l**2, pairs[1])


# ---------------------------------------------------------------------------
# quasimode
# ---------------------------------------------------------------------------

@dataclass
class Quasimode:
    params: object
    grid_plus: RadialGrid
    grid_full: RadialGrid
    E_plus: float
    sqrtE_plus: float
    lambda_H: float
    eig_residual: float
    phi_plus: SpinorField
    phi_h: SpinorField
    cutoff: CutoffGeometry
    chi_norm: float
    overlap_trial: float
    pairing_gap: float
    singular_values: np.ndarray = dc_field(repr=False)


def _full_grid(grid_plus, margin):
    cells = max(1, int(round(margin / grid_plus.dx)))
    return grid_plus.extended_left(cells), cells


def full_grid(params, n=4000, x_cut=-1e-3, margin=2.0):
    """Full-line grid used by :func:`build_quasimode` for the same settings."""
    return _full_grid(restricted_grid(params, n, x_cut), margin)[0]


def build_quasimode(params, grid=None, S=None, band=DEFAULT_BAND, margin=2.0, tol=1e-9):
    """Cutoff quasimode ``phi_h = chi phi_plus / ||chi phi_plus||`` on the full-line grid.

    Parameters
    ----------
    params : SpacetimeParams
    grid : RadialGrid, optional
        Restricted grid starting at ``x_plus`` (default 4000 nodes, ``x_cut = -1e-3 l``).
    S : float, optional
        Energy margin; default half the barrier height.
    band : tuple
        Transition band of ``chi`` as fractions of ``[x_plus, A_cut]``.
    margin : float
        Length (in ``x``) of the zero extension left of ``x_plus``.
    """
    grid = grid or restricted_grid(params)
    cut = cutoff_geometry(params, S, band)
    ep = find_E_plus(params, grid, tol=tol)
    E_plus = ep.value
    if E_plus >= 1.0 / params.l**2 + cut.S:
        raise ConfigurationError(f"E_plus={E_plus:.6g} is not below 1/l^2 + S")
    sq = math.sqrt(E_plus)

    hop = assemble_restricted("H_plus", params, grid)
    hpairs = eigen_solve(hop, sq, k=2, tol=tol)
    lam0 = hpairs[0].value
    if abs(lam0 - math.sqrt(ep.E2)) > 10 * math.sqrt(params.h):
        raise NumericalError(f"no H_plus eigenvalue near sqrt(E2); nearest {[p.value for p in hpairs]}")
    cluster = [p for p in hpairs if abs(p.value - lam0) <= 1e-8 * max(1.0, abs(lam0))]
    Q = np.column_stack([p.vector.to_vector() for p in cluster])
    V = np.column_stack([ep.pair.vector.to_vector(), ep.partner.vector.to_vector()])
    # eigsh vectors inside a degenerate cluster need not be orthogonal
    Q, _ = np.linalg.qr(Q)
    V, _ = np.linalg.qr(V)
    u, s, _ = np.linalg.svd(Q.conj().T @ V)
    y = Q @ u[:, 0]
    y /= np.linalg.norm(y)
    lam = float(np.real(np.vdot(y, hop.matrix @ y)))
    eig_res = float(np.linalg.norm(hop.matrix @ y - lam * y))
    phi_plus = SpinorField.from_vector(grid, y)
    # fix the global phase so the largest component is real positive
    k = np.argmax(np.abs(phi_plus.values))
    phase = np.conj(phi_plus.values.flat[k]) / abs(phi_plus.values.flat[k])
    phi_plus = phi_plus * phase

    neg = eigen_solve(hop, -lam, k=1, tol=tol)[0].value

    full, cells = _full_grid(grid, margin)
    chi = cut.chi(grid.x)
    cut_vals = chi[:, None] * phi_plus.values
    chi_norm = SpinorField(grid, cut_vals).norm()
    vals = np.zeros((full.n, 4), dtype=complex)
    vals[cells:] = cut_vals / chi_norm
    phi_h = SpinorField(full, vals)

    overlap = abs(trial_spinor(grid, params).inner(phi_plus))
    return Quasimode(params, grid, full, E_plus, sq, lam, eig_res, phi_plus, phi_h, cut,
                     chi_norm, overlap, abs(neg + lam), s)


def residual_norm(phi, sqrt_e, H):
    """``||H phi - sqrt_e phi||`` in the grid norm."""
    return (H.apply(phi) - phi * sqrt_e).norm()


def commutator_norm(qm):
    """``||h chi' phi_plus|| / ||chi phi_plus||``, the predicted residual."""
    g = qm.grid_plus
    dchi = qm.cutoff.chi.derivative(g.x)
    return SpinorField(g, qm.params.h * dchi[:, None] * qm.phi_plus.values).norm() / qm.chi_norm


def mass_window(phi, fraction=0.99):
    """Equal-tailed window carrying ``fraction`` of ``||phi||²``.

    Returns ``(a, b)`` as node coordinates, so the window lies strictly
    inside the grid.
    """
    g = phi.grid
    dens = g.weights * phi.density()
    cdf = np.cumsum(dens) / dens.sum()
    tail = 0.5 * (1.0 - fraction)
    i = int(np.searchsorted(cdf, tail, side="right"))
    j = int(np.searchsorted(cdf, 1.0 - tail, side="left"))
    i = max(i - 1, 0)
    j = min(j + 1, g.n - 1)
    return float(g.x[i]), float(g.x[j])


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

@dataclass
class ResidualRecord:
    h: float
    E_plus: float
    sqrtE_plus: float
    lambda_H: float
    residual: float
    commutator: float
    identity_gap: float
    residual_fine: float
    floor: float
    floor_limited: bool
    n: int
    dx: float
    x_cut: float
    band: tuple

    @property
    def identity_tolerance(self):
        return max(1e-10, 5.0 * self.floor)

    @property
    def identity_ok(self):
        return self.identity_gap <= self.identity_tolerance


@dataclass
class SweepFit:
    D: float
    intercept: float
    r_squared: float
    C_envelope: float
    used: list
    floor_limited: list


def _measure(params, n, x_cut, S, band, margin):
    qm = build_quasimode(params, restricted_grid(params, n, x_cut), S, band, margin)
    H = assemble_H(qm.grid_full, params)
    res = residual_norm(qm.phi_h, qm.lambda_H, H)
    return qm, res


def residual_record(params, n=4000, x_cut=-1e-3, S=None, band=DEFAULT_BAND, margin=2.0, refine=True):
    """Residual of the quasimode at one ``h``, with a grid-doubling floor estimate."""
    qm, res = _measure(params, n, x_cut, S, band, margin)
    comm = commutator_norm(qm)
    solver_floor = qm.eig_residual / qm.chi_norm
    res_fine = float("nan")
    floor = solver_floor
    if refine:
        _, res_fine = _measure(params, 2 * (n + 1) - 1, x_cut, S, band, margin)
        floor = max(solver_floor, abs(res - res_fine))
    return ResidualRecord(params.h, qm.E_plus, qm.sqrtE_plus, qm.lambda_H, res, comm,
                          abs(res - comm), res_fine, floor, bool(res < 10 * floor), n,
                          qm.grid_plus.dx, x_cut, tuple(band))


def fit_residuals(records):
    """Least-squares fit ``log r = log C - D/h`` over records that are not floor-limited."""
    used = [r for r in records if not r.floor_limited and r.residual > 0]
    limited = [r for r in records if r.floor_limited]
    if len(used) < 3:
        raise NumericalError(f"only {len(used)} usable records for the residual fit")
    inv_h = np.array([1.0 / r.h for r in used])
    logr = np.log([r.residual for r in used])
    slope, icpt = np.polyfit(inv_h, logr, 1)
    pred = slope * inv_h + icpt
    ss_res = float(np.sum((logr - pred) ** 2))
    ss_tot = float(np.sum((logr - logr.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    D = float(-slope)
    envelope = float(max(r.residual * math.exp(D / r.h) for r in used))
    return SweepFit(D, float(icpt), float(r2), envelope, used, limited)


def residual_sweep(h_list, params, n=4000, x_cut=-1e-3, S=None, band=DEFAULT_BAND, margin=2.0,
                   workers=1, refine=True):
    """Residual records over decreasing ``h_list`` plus the exponential fit.

    ``n`` may be an int, a callable ``h -> n`` or ``"auto"`` (at least 16
    nodes per ``h^{1/2} l²`` and never fewer than 4000).
    """
    h_list = [float(h) for h in h_list]
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ConfigurationError("h_list must be strictly decreasing")

    def n_for(h):
        if n == "auto":
            _, xp = potentials.inner_cutoff_x_plus(params)
            need = int(math.ceil(16 * (x_cut * params.l - xp) / (math.sqrt(h) * params.l**2)))
            return max(4000, need)
        return int(n(h)) if callable(n) else int(n)

    def task(h):
        return residual_record(params.with_h(h), n_for(h), x_cut, S, band, margin, refine)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(task, h_list))
    else:
        records = [task(h) for h in h_list]
    return records, fit_residuals(records)


# ---------------------------------------------------------------------------
# proximity of E_plus to the model level
# ---------------------------------------------------------------------------

@dataclass
class ProximityFit:
    h: np.ndarray
    E_plus: np.ndarray
    E2: np.ndarray
    q: float
    log_C: float
    r_squared: float


def proximity_fit(h_list, params, n=4000, x_cut=-1e-3):
    """Fit ``|E_plus(h) - E2(h)| ~ C h^q`` by least squares in log-log."""
    h = np.array([float(v) for v in h_list])
    e_plus, e2 = [], []
    for hv in h:
        p = params.with_h(hv)
        e_plus.append(find_E_plus(p, restricted_grid(p, n, x_cut)).value)
        e2.append(model_levels(p).E2)
    e_plus, e2 = np.array(e_plus), np.array(e2)
    gap = np.abs(e_plus - e2)
    if np.any(gap == 0):
        raise NumericalError("E_plus coincides with E2; exponent undefined")
    logh, logg = np.log(h), np.log(gap)
    q, icpt = np.polyfit(logh, logg, 1)
    pred = q * logh + icpt
    ss_tot = float(np.sum((logg - logg.mean()) ** 2))
    r2 = 1.0 - float(np.sum((logg - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return ProximityFit(h, e_plus, e2, float(q), float(icpt), float(r2))
