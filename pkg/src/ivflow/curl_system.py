"""Curl-side dynamics: the bilinear source map, the co-evolved (w, r_k)
system, the curl-of-advection identity, and the derivative commutator with
its ratio survey.

The curl system is never the primary formulation; it is advanced alongside
the main state (sharing RK4 stages and dt) so any disagreement with the
curls of (u, F_k) isolates formulation differences.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, spectral
from .fields import State, l2_norm, sobolev_norm, sup_norm
from .spectral import Grid

COMMUTATOR_ORDER_MAX = 3


@dataclass
class CurlState:
    grid: Grid
    time: float
    w: np.ndarray                 # (3, n, n, n)
    r: np.ndarray                 # (3, 3, n, n, n)

    def copy(self) -> "CurlState":
        return CurlState(self.grid, self.time, self.w.copy(), self.r.copy())


def curl_state_from(state: State) -> CurlState:
    grid = state.grid
    n = grid.n
    stack = np.concatenate([state.u, state.f.reshape(9, n, n, n)])
    curls = spectral.curl(grid, stack.reshape(4, 3, n, n, n))
    return CurlState(grid, state.time, curls[0], curls[1:4].copy())


def bilinear_a(x_mat: np.ndarray, y_mat: np.ndarray) -> np.ndarray:
    """a(X, Y) = sum_i (X^T e_i) x (Y e_i) for plain 3x3 matrices."""
    x_mat = np.asarray(x_mat, dtype=float)
    y_mat = np.asarray(y_mat, dtype=float)
    if x_mat.shape != (3, 3) or y_mat.shape != (3, 3):
        raise ValueError("bilinear_a expects 3x3 matrices")
    if not (np.isfinite(x_mat).all() and np.isfinite(y_mat).all()):
        raise ValueError("bilinear_a expects finite matrices")
    out = np.zeros(3)
    for i in range(3):
        out += np.cross(x_mat[i, :], y_mat[:, i])
    return out


def bilinear_a_field(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Pointwise lift of a(X, Y) to gradient tensors g[j, c] = d v_c / d x_j."""
    shape = gx.shape[2:]
    npts = int(np.prod(shape))
    out = kernels.bilinear_field(
        np.ascontiguousarray(gx).reshape(3, 3, npts),
        np.ascontiguousarray(gy).reshape(3, 3, npts),
    )
    return out.reshape((3,) + shape)


def curl_advection_identity_residual(grid: Grid, u: np.ndarray, v: np.ndarray) -> float:
    """L2 norm of curl[(u.grad)v] - a(grad u, grad v) - (u.grad)(curl v)."""
    gu = spectral.gradient_tensor(grid, u)
    gv = spectral.gradient_tensor(grid, v)
    adv = _dealias_phys(grid, np.einsum("jxyz,jcxyz->cxyz", u, gv))
    lhs = spectral.curl(grid, adv)

    cv = spectral.curl(grid, v)
    gcv = spectral.gradient_tensor(grid, cv)
    rhs = _dealias_phys(grid, bilinear_a_field(gu, gv)
                        + np.einsum("jxyz,jcxyz->cxyz", u, gcv))
    return l2_norm(lhs - rhs)


def _dealias_phys(grid: Grid, arr: np.ndarray) -> np.ndarray:
    return grid.inv(grid.fwd(arr) * grid._mask_r)


def curl_sources(state: State):
    """S and T_k assembled pointwise from the gradient tensors, dealiased."""
    grid = state.grid
    n = grid.n
    g = grid.inv(grid.grad_spec(grid.fwd(
        np.concatenate([state.u, state.f.reshape(9, n, n, n)]))))
    gu = g[:, 0:3]
    s = bilinear_a_field(gu, gu)
    t = np.empty((3, 3, n, n, n))
    for k in range(3):
        gfk = g[:, 3 + 3 * k:6 + 3 * k]
        s -= bilinear_a_field(gfk, gfk)
        t[k] = bilinear_a_field(gu, gfk) - bilinear_a_field(gfk, gu)
    return _dealias_phys(grid, s), _dealias_phys(grid, t)


def rhs_curl(state: State, cs: CurlState):
    """dw = -(u.grad)w + sum_k (F_k.grad)r_k - S and the matching dr_k."""
    from .dynamics import _rhs_state

    _, _, dw, dr = _rhs_state(state, cs)
    return dw, dr


def curl_consistency_error(state: State, cs: CurlState) -> float:
    """L2 distance between the co-evolved curls and the curls of the state."""
    ref = curl_state_from(state)
    err = l2_norm(ref.w - cs.w)
    for k in range(3):
        err += l2_norm(ref.r[k] - cs.r[k])
    return err


# ---------------------------------------------------------------------------
# derivative commutator and its ratio survey
# ---------------------------------------------------------------------------

def commutator(grid: Grid, f: np.ndarray, g: np.ndarray, alpha) -> np.ndarray:
    """d^alpha(fg) - f d^alpha(g) with spectral derivatives, dealiased products."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != 3 or any(a < 0 for a in alpha):
        raise ValueError("alpha must be a multi-index of three nonnegative integers")
    if sum(alpha) > COMMUTATOR_ORDER_MAX:
        raise ValueError(f"|alpha| must be <= {COMMUTATOR_ORDER_MAX}")

    mult = _alpha_multiplier(grid, alpha)
    fg_h = grid.fwd(f * g) * grid._mask_r
    d_fg = grid.inv(mult * fg_h)
    dg = grid.inv(mult * grid.fwd(g))
    f_dg = grid.inv(grid.fwd(f * dg) * grid._mask_r)
    return d_fg - f_dg


def _alpha_multiplier(grid: Grid, alpha):
    return (grid._ikx ** alpha[0]) * (grid._iky ** alpha[1]) * (grid._ikz ** alpha[2])


def _all_multi_indices(order_max: int):
    out = []
    for a1 in range(order_max + 1):
        for a2 in range(order_max + 1 - a1):
            for a3 in range(order_max + 1 - a1 - a2):
                out.append((a1, a2, a3))
    return out


def moser_ratio(grid: Grid, f: np.ndarray, g: np.ndarray, alpha) -> float:
    """|commutator|_L2 / (|f|_H3 |g|_Linf + |grad f|_Linf |g|_H2)."""
    num = l2_norm(commutator(grid, f, g, alpha))
    grad_f = spectral.gradient(grid, f)
    den = (sobolev_norm(grid, f, 3) * sup_norm(g)
           + sup_norm(grad_f) * sobolev_norm(grid, g, 2))
    if den == 0.0:
        return 0.0
    return num / den


@dataclass
class SurveyReport:
    survey: str
    grid_n: int
    ensemble: int
    seed: int
    ratio_max: float
    ratio_mean: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray

    def as_text(self) -> str:
        lines = [
            f"survey = {self.survey}",
            f"grid_n = {self.grid_n}",
            f"ensemble = {self.ensemble}",
            f"seed = {self.seed}",
            f"ratio_max = {self.ratio_max:.12g}",
            f"ratio_mean = {self.ratio_mean:.12g}",
            "hist_edges = " + ",".join(f"{e:.6g}" for e in self.hist_edges),
            "hist_counts = " + ",".join(str(int(c)) for c in self.hist_counts),
        ]
        return "\n".join(lines) + "\n"


def _moser_pair_ratios(grid: Grid, f: np.ndarray, g: np.ndarray) -> list:
    """Ratios for all |alpha| <= 3 with per-pair quantities hoisted."""
    den = (sobolev_norm(grid, f, 3) * sup_norm(g)
           + sup_norm(spectral.gradient(grid, f)) * sobolev_norm(grid, g, 2))
    fg_h = grid.fwd(f * g) * grid._mask_r
    g_h = grid.fwd(g)
    vol = (2.0 * np.pi) ** 3
    ratios = []
    for alpha in _all_multi_indices(COMMUTATOR_ORDER_MAX):
        mult = _alpha_multiplier(grid, alpha)
        dg = grid.inv(mult * g_h)
        diff_h = mult * fg_h - grid.fwd(f * dg) * grid._mask_r
        num = float(np.sqrt(vol * grid.spectral_energy(diff_h).sum()))
        ratios.append(num / den if den > 0 else 0.0)
    return ratios


def moser_ratio_survey(ensemble_size: int, seed: int, grid: Grid) -> SurveyReport:
    """Ratio statistics over random band-limited scalar pairs, all |alpha| <= 3."""
    if ensemble_size < 1:
        raise ValueError("ensemble_size must be >= 1")
    from .fields import random_scalar

    ratios = []
    for i in range(ensemble_size):
        f = random_scalar(grid, (seed, i, 0))
        g = random_scalar(grid, (seed, i, 1))
        ratios.extend(_moser_pair_ratios(grid, f, g))
    ratios = np.asarray(ratios)
    counts, edges = np.histogram(ratios, bins=10, range=(0.0, max(ratios.max(), 1e-300)))
    return SurveyReport("moser_commutator", grid.n, ensemble_size, seed,
                        float(ratios.max()), float(ratios.mean()), edges, counts)
