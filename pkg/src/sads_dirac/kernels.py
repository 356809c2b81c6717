"""Hot numerical kernels.

Two families live here:

* inversion of the closed-form tortoise coordinate and tabulation of the
  radial potentials on a node array (one safeguarded Newton solve per node);
* the block-tridiagonal Cayley propagator used for time evolution.

Each kernel has a numba version and a numpy/scipy fallback.  The public
dispatchers pick the numba path unless ``SADS_DIRAC_DISABLE_NUMBA`` is set.
Both paths are kept callable so tests and ``benchmarks/`` can compare them.
"""
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._jit import njit, use_numba

# log of the gap u = r - r_SAdS is searched in this window
_S_LO = -740.0
_S_HI = 700.0


# ---------------------------------------------------------------------------
# closed-form tortoise coordinate in the log-gap variable s = ln(r - r_SAdS)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _x_of_s(s, a, b, w, alpha, l2):
    u = math.exp(s)
    r = a + u
    if u < 0.5 * r:
        lg = math.log(u / r)
    else:
        lg = math.log1p(-a / r)
    quad = 0.5 * math.log1p(a / r + b / r / r)
    tail = (a + 2.0 * b / a) / w * math.atan(w / (2.0 * r + a))
    return l2 * alpha * (lg - quad - tail)


@njit(cache=True)
def _dx_ds(s, a, b, l2):
    r = a + math.exp(s)
    return l2 / (r + a + b / r)


@njit(cache=True)
def _invert_one(x, a, b, w, alpha, l2, fp_horizon, c_horizon):
    if not (x < 0.0):
        return np.nan
    lo = _S_LO
    hi = _S_HI
    # beyond the representable window the gap is clamped to its end
    if _x_of_s(lo, a, b, w, alpha, l2) >= x:
        return lo
    if _x_of_s(hi, a, b, w, alpha, l2) <= x:
        return hi
    # asymptotic starting guesses: x ~ -l^2/r near infinity, x ~ s/F'(r_s) + c at the horizon
    r0 = l2 / (-x)
    if r0 > 2.0 * a:
        s = math.log(r0 - a)
    else:
        s = (x - c_horizon) * fp_horizon
    if s <= lo or s >= hi:
        s = 0.5 * (lo + hi)
    for _ in range(200):
        f = _x_of_s(s, a, b, w, alpha, l2) - x
        if f == 0.0:
            return s
        if f > 0.0:
            hi = s
        else:
            lo = s
        step = f / _dx_ds(s, a, b, l2)
        s_new = s - step
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi)
        if abs(s_new - s) <= 4e-16 * max(1.0, abs(s)) or hi - lo <= 4e-16 * max(1.0, abs(s)):
            return s_new
        s = s_new
    return s


@njit(cache=True)
def _profile_numba(xs, M, l, a, b, w, alpha, fp_horizon, c_horizon):
    n = xs.shape[0]
    out = np.empty((7, n))
    l2 = l * l
    for i in range(n):
        s = _invert_one(xs[i], a, b, w, alpha, l2, fp_horizon, c_horizon)
        u = math.exp(s)
        r = a + u
        F = u * (r + a + b / r) / l2
        Fp = 2.0 * (M / (r * r) + r / l2)
        sq = math.sqrt(F)
        out[0, i] = r
        out[1, i] = u
        out[2, i] = F
        out[3, i] = sq / r
        out[4, i] = sq
        out[5, i] = sq * (3.0 * M - r) / (r * r * r)
        out[6, i] = 0.5 * Fp * sq
    return out


def _x_of_s_np(s, a, b, w, alpha, l2):
    u = np.exp(s)
    r = a + u
    near = u < 0.5 * r
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(near, np.log(np.where(near, u / r, 1.0)), np.log1p(-a / r))
    quad = 0.5 * np.log1p(a / r + b / r / r)
    tail = (a + 2.0 * b / a) / w * np.arctan(w / (2.0 * r + a))
    return l2 * alpha * (lg - quad - tail)


def _profile_numpy(xs, M, l, a, b, w, alpha, fp_horizon, c_horizon):
    xs = np.asarray(xs, dtype=float)
    l2 = l * l
    bad = ~(xs < 0.0)
    x = np.where(bad, -1.0, xs)
    lo = np.full(x.shape, _S_LO)
    hi = np.full(x.shape, _S_HI)
    below = _x_of_s_np(lo, a, b, w, alpha, l2) >= x
    above = _x_of_s_np(hi, a, b, w, alpha, l2) <= x
    r0 = l2 / (-x)
    with np.errstate(invalid="ignore"):
        s = np.where(r0 > 2.0 * a, np.log(np.maximum(r0 - a, 1e-300)), (x - c_horizon) * fp_horizon)
    s = np.where((s <= lo) | (s >= hi), 0.5 * (lo + hi), s)
    s = np.where(below, _S_LO, np.where(above, _S_HI, s))
    active = ~(bad | below | above)
    for _ in range(200):
        if not active.any():
            break
        f = _x_of_s_np(s, a, b, w, alpha, l2) - x
        hi = np.where(active & (f > 0.0), s, hi)
        lo = np.where(active & (f < 0.0), s, lo)
        r = a + np.exp(s)
        s_new = s - f * (r + a + b / r) / l2
        out_of = ~((lo < s_new) & (s_new < hi))
        s_new = np.where(out_of, 0.5 * (lo + hi), s_new)
        scale = np.maximum(1.0, np.abs(s))
        done = (f == 0.0) | (np.abs(s_new - s) <= 4e-16 * scale) | (hi - lo <= 4e-16 * scale)
        s = np.where(active & (f != 0.0), s_new, s)
        active &= ~done
    s = np.where(bad, np.nan, s)
    u = np.exp(s)
    r = a + u
    F = u * (r + a + b / r) / l2
    Fp = 2.0 * (M / (r * r) + r / l2)
    sq = np.sqrt(F)
    return np.stack([r, u, F, sq / r, sq, sq * (3.0 * M - r) / r**3, 0.5 * Fp * sq])


def radial_profile(xs, M, l, a, b, w, alpha, fp_horizon, c_horizon, accelerated=None):
    """Tabulate ``(r, r - r_SAdS, F, A, B, A', B')`` at tortoise nodes ``xs``.

    Nodes with ``x >= 0`` give NaN rows.  Nodes beyond the representable
    range have their gap ``r - r_SAdS`` clamped to ``exp(-740)`` or ``exp(700)``.
    """
    xs = np.ascontiguousarray(np.atleast_1d(np.asarray(xs, dtype=float)))
    if accelerated is None:
        accelerated = use_numba()
    fn = _profile_numba if accelerated else _profile_numpy
    return fn(xs, float(M), float(l), float(a), float(b), float(w), float(alpha),
              float(fp_horizon), float(c_horizon))


def tortoise_closed_form(gap, a, b, w, alpha, l):
    """Closed-form ``x(r)`` evaluated from the gap ``r - r_SAdS`` (array friendly)."""
    gap = np.asarray(gap, dtype=float)
    return _x_of_s_np(np.log(gap), a, b, w, alpha, l * l)


# ---------------------------------------------------------------------------
# Cayley propagation for block-tridiagonal Hermitian matrices
# ---------------------------------------------------------------------------
#
# The coupling blocks of the discrete Dirac operator are diagonal (the
# derivative multiplies the diagonal matrix g0 g1), so only the node blocks
# are dense.  Block elimination of (I - i a H), a = dt/2:
#   S_0 = Dm_0,  S_j = Dm_j - diag(lm_{j-1}) S_{j-1}^{-1} diag(um_{j-1})
# forward:  y_j = b_j - lm_{j-1} * z_{j-1},  z_j = S_j^{-1} y_j
# back:     psi_j = z_j - W_j psi_{j+1},     W_j = S_j^{-1} diag(um_j)

@njit(cache=True)
def _cayley_factor(dm, um, lm):
    n = dm.shape[0]
    sinv = np.empty_like(dm)
    wmat = np.empty((max(n - 1, 0), 4, 4), dtype=dm.dtype)
    sinv[0] = np.linalg.inv(dm[0])
    for j in range(1, n):
        s = dm[j].copy()
        for a in range(4):
            for b in range(4):
                s[a, b] -= lm[j - 1, a] * sinv[j - 1, a, b] * um[j - 1, b]
        sinv[j] = np.linalg.inv(s)
    for j in range(n - 1):
        for a in range(4):
            for b in range(4):
                wmat[j, a, b] = sinv[j, a, b] * um[j, b]
    return sinv, wmat


@njit(cache=True)
def _cayley_step(psi, dp, up, lp, sinv, wmat, lm, b, z):
    n = psi.shape[0]
    for j in range(n):
        for a in range(4):
            acc = dp[j, a, 0] * psi[j, 0] + dp[j, a, 1] * psi[j, 1] + dp[j, a, 2] * psi[j, 2] + dp[j, a, 3] * psi[j, 3]
            if j + 1 < n:
                acc += up[j, a] * psi[j + 1, a]
            if j > 0:
                acc += lp[j - 1, a] * psi[j - 1, a]
            b[j, a] = acc
    for j in range(n):
        if j > 0:
            for a in range(4):
                b[j, a] -= lm[j - 1, a] * z[j - 1, a]
        for a in range(4):
            z[j, a] = sinv[j, a, 0] * b[j, 0] + sinv[j, a, 1] * b[j, 1] + sinv[j, a, 2] * b[j, 2] + sinv[j, a, 3] * b[j, 3]
    for a in range(4):
        psi[n - 1, a] = z[n - 1, a]
    for j in range(n - 2, -1, -1):
        for a in range(4):
            psi[j, a] = z[j, a] - (wmat[j, a, 0] * psi[j + 1, 0] + wmat[j, a, 1] * psi[j + 1, 1]
                                   + wmat[j, a, 2] * psi[j + 1, 2] + wmat[j, a, 3] * psi[j + 1, 3])


@njit(cache=True)
def _cayley_run(psi, dp, up, lp, sinv, wmat, lm, n_steps, sample_steps, kmask):
    n = psi.shape[0]
    b = np.empty_like(psi)
    z = np.empty_like(psi)
    m = sample_steps.shape[0]
    norms = np.empty(m)
    local = np.empty(m)
    k = 0
    for step in range(n_steps + 1):
        while k < m and sample_steps[k] == step:
            tot = 0.0
            loc = 0.0
            for j in range(n):
                v = 0.0
                for c in range(4):
                    v += psi[j, c].real ** 2 + psi[j, c].imag ** 2
                tot += v
                if kmask[j]:
                    loc += v
            norms[k] = math.sqrt(tot)
            local[k] = math.sqrt(loc)
            k += 1
        if step == n_steps:
            break
        _cayley_step(psi, dp, up, lp, sinv, wmat, lm, b, z)
    return norms, local


class CayleyPropagator:
    """Repeated application of ``(I - i dt H/2)^{-1} (I + i dt H/2)``.

    ``diag`` (n, 4, 4) and ``upper`` (n-1, 4, 4) are the blocks of the
    Hermitian matrix ``H`` in Euclidean (weight-scaled) variables; the
    coupling blocks ``upper`` must be diagonal.  The numba path factors
    ``I - i dt H/2`` by block elimination; no pivoting is needed because the
    Hermitian part of that matrix is the identity.  The fallback factors the
    same matrix with SuperLU.
    """

    def __init__(self, diag, upper, dt, accelerated=None):
        if accelerated is None:
            accelerated = use_numba()
        self.accelerated = bool(accelerated)
        self.dt = float(dt)
        diag = np.ascontiguousarray(diag, dtype=complex)
        upper = np.asarray(upper, dtype=complex)
        u = np.ascontiguousarray(np.diagonal(upper, axis1=1, axis2=2))
        if upper.size and np.abs(upper - u[:, :, None] * np.eye(4)).max() > 0:
            raise ValueError("coupling blocks must be diagonal")
        self.n = diag.shape[0]
        ia = 0.5j * self.dt
        eye = np.eye(4)
        self._dp = np.ascontiguousarray(eye + ia * diag)
        self._up = ia * u
        self._lp = np.ascontiguousarray(ia * np.conj(u))
        dm = np.ascontiguousarray(eye - ia * diag)
        um = np.ascontiguousarray(-ia * u)
        self._lm = np.ascontiguousarray(-ia * np.conj(u))
        if self.accelerated:
            self._sinv, self._w = _cayley_factor(dm, um, self._lm)
        else:
            self._plus = _tridiag_matrix(self._dp, self._up, self._lp).tocsr()
            self._lu = spla.splu(_tridiag_matrix(dm, um, self._lm).tocsc())

    def run(self, psi, n_steps, sample_steps, kmask):
        """Advance ``psi`` (n, 4) in place; return norms and masked norms at ``sample_steps``."""
        sample_steps = np.asarray(sample_steps, dtype=np.int64)
        kmask = np.asarray(kmask, dtype=np.bool_)
        if self.accelerated:
            return _cayley_run(psi, self._dp, self._up, self._lp, self._sinv, self._w, self._lm,
                               int(n_steps), sample_steps, kmask)
        norms = np.empty(len(sample_steps))
        local = np.empty(len(sample_steps))
        flat = psi.reshape(-1)
        k = 0
        for step in range(int(n_steps) + 1):
            while k < len(sample_steps) and sample_steps[k] == step:
                dens = np.sum(np.abs(psi) ** 2, axis=1)
                norms[k] = math.sqrt(dens.sum())
                local[k] = math.sqrt(dens[kmask].sum())
                k += 1
            if step == n_steps:
                break
            flat[:] = self._lu.solve(self._plus @ flat)
        return norms, local


def _tridiag_matrix(diag, upper, lower):
    # diag (n,4,4) dense blocks; upper/lower (n-1,4) diagonal couplings
    n = diag.shape[0]
    main = sp.block_diag(list(diag), format="csr")
    off_u = sp.diags(upper.reshape(-1), 4, shape=(4 * n, 4 * n))
    off_l = sp.diags(lower.reshape(-1), -4, shape=(4 * n, 4 * n))
    return main + off_u + off_l
