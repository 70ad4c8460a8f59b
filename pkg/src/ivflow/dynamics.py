"""Right-hand sides and RK4 time stepping for the coupled (u, F) system.

Pressure is eliminated by Leray projection inside the velocity right-hand
side; all quadratic terms are formed in physical space and dealiased with
the 2/3 rule.  The deformation columns are never re-projected: keeping
their divergence transported discretely is itself monitored.

The stepping path works on one stacked array (u, F columns and, when
co-evolving, w, r columns) so transforms run batched, and reuses per-grid
scratch buffers; stepping is sequential by contract, one orchestrator at a
time per grid.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, spectral
from .fields import State, sup_norm
from .spectral import Grid

EPS_FLOOR = 1e-8          # keeps the CFL formula finite at equilibrium
TAIL_HALT_DEFAULT = 1e-4  # spectral tail fraction beyond which a run halts
F_DIV_WARN = 1e-6         # deformation divergence drift worth warning about


class NonFiniteFieldError(RuntimeError):
    """A step produced non-finite values; carries the offending field name."""

    def __init__(self, field_name: str):
        super().__init__(f"non-finite values in field '{field_name}'")
        self.field_name = field_name


@dataclass
class StepControl:
    mode: str                 # "fixed_dt" or "cfl"
    t_end: float
    dt: float = 0.0
    cfl_number: float = 0.0
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.mode not in ("fixed_dt", "cfl"):
            raise ValueError(f"unknown step mode '{self.mode}'")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.mode == "fixed_dt" and self.dt <= 0:
            raise ValueError("dt must be positive in fixed_dt mode")
        if self.mode == "cfl" and not 0 < self.cfl_number <= 1:
            raise ValueError("cfl_number must lie in (0, 1]")


def _rhs_stacked(grid: Grid, y: np.ndarray) -> np.ndarray:
    """Dealiased, projected RHS of the stacked system (12 or 24 fields)."""
    n = grid.n
    m = y.shape[0]
    yh = grid.fwd(y)
    gbuf = grid.scratch(f"grad_spec_{m}", (3,) + yh.shape, np.complex128)
    g = grid.inv(grid.grad_spec_into(yh, gbuf))

    npts = n * n * n
    yf = y.reshape(m, npts)
    gf_ = g.reshape(3, m, npts)
    rbuf = grid.scratch(f"rhs_{m}", (m, npts))
    kernels.primary_rhs(yf[0:3], yf[3:12].reshape(3, 3, npts),
                        gf_[:, 0:3], gf_[:, 3:12].reshape(3, 3, 3, npts),
                        rbuf[0:3], rbuf[3:12].reshape(3, 3, npts))
    if m == 24:
        kernels.curl_rhs(yf[0:3], yf[3:12].reshape(3, 3, npts),
                         gf_[:, 0:3], gf_[:, 3:12].reshape(3, 3, 3, npts),
                         gf_[:, 12:15], gf_[:, 15:24].reshape(3, 3, 3, npts),
                         rbuf[12:15], rbuf[15:24].reshape(3, 3, npts))

    rh = grid.fwd(rbuf.reshape(m, n, n, n))
    rh *= grid._mask_r
    spectral.leray_project_spec(grid, rh[0:3], out=rh[0:3])
    return grid.inv(rh)


def _stack_state(grid: Grid, u, f, w=None, r=None) -> np.ndarray:
    n = grid.n
    m = 12 if w is None else 24
    y = grid.scratch(f"state_{m}", (m, n, n, n))
    y[0:3] = u
    y[3:12] = f.reshape(9, n, n, n)
    if w is not None:
        y[12:15] = w
        y[15:24] = r.reshape(9, n, n, n)
    return y


def _rhs_state(state: State, cs=None):
    """One-shot RHS evaluation returning fresh arrays (test/diagnostic path)."""
    grid = state.grid
    n = grid.n
    coupled = cs is not None
    y = _stack_state(grid, state.u, state.f,
                     cs.w if coupled else None, cs.r if coupled else None)
    out = _rhs_stacked(grid, y)
    du = out[0:3].copy()
    df = out[3:12].reshape(3, 3, n, n, n).copy()
    if not coupled:
        return du, df, None, None
    return du, df, out[12:15].copy(), out[15:24].reshape(3, 3, n, n, n).copy()


_GROUPS_PRIMARY = (("u", 0, 3), ("f", 3, 12))
_GROUPS_COUPLED = (("u", 0, 3), ("f", 3, 12), ("w", 12, 15), ("r", 15, 24))


def _check_finite_stacked(y: np.ndarray) -> None:
    if np.isfinite(y).all():
        return
    groups = _GROUPS_COUPLED if y.shape[0] == 24 else _GROUPS_PRIMARY
    for name, lo, hi in groups:
        if not np.isfinite(y[lo:hi]).all():
            raise NonFiniteFieldError(name)


def rhs_velocity(state: State) -> np.ndarray:
    """leray_project(-(u.grad)u + sum_k (F_k.grad)F_k), dealiased."""
    du, _, _, _ = _rhs_state(state)
    if not np.isfinite(du).all():
        raise NonFiniteFieldError("u")
    return du


def rhs_deformation_column(state: State, k: int) -> np.ndarray:
    """-(u.grad)F_k + (F_k.grad)u for column k in 1..3, dealiased."""
    if not 1 <= k <= 3:
        raise ValueError("column index must be 1, 2 or 3")
    _, df, _, _ = _rhs_state(state)
    if not np.isfinite(df).all():
        raise NonFiniteFieldError("f")
    return df[k - 1]


def recover_pressure(state: State) -> np.ndarray:
    """Diagnostic mean-zero p with -laplacian(p) = div[(u.grad)u - sum (F_k.grad)F_k]."""
    grid = state.grid
    g = spectral.divergence(grid, -_unprojected_velocity_rhs(state))
    return spectral.solve_poisson(grid, g)


def _unprojected_velocity_rhs(state: State) -> np.ndarray:
    grid = state.grid
    n = grid.n
    npts = n * n * n
    y = np.concatenate([state.u, state.f.reshape(9, n, n, n)])
    g = grid.inv(grid.grad_spec(grid.fwd(y)))
    yf = y.reshape(12, npts)
    gf_ = np.ascontiguousarray(g).reshape(3, 12, npts)
    du = np.empty((3, npts))
    df = np.empty((3, 3, npts))
    kernels.primary_rhs(yf[0:3], yf[3:12].reshape(3, 3, npts),
                        gf_[:, 0:3], gf_[:, 3:12].reshape(3, 3, 3, npts), du, df)
    duh = grid.fwd(du.reshape(3, n, n, n))
    duh *= grid._mask_r
    return grid.inv(duh)


def step_rk4(state: State, dt: float) -> State:
    """One classical RK4 step; u is re-projected after the combination stage."""
    new_state, _ = _rk4(state, None, dt)
    return new_state


def step_rk4_coupled(state: State, cs, dt: float):
    """Advance State and its co-evolved CurlState through shared RK4 stages."""
    return _rk4(state, cs, dt)


def _rk4(state: State, cs, dt: float):
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    n = grid.n
    coupled = cs is not None
    m = 24 if coupled else 12

    y0 = _stack_state(grid, state.u, state.f,
                      cs.w if coupled else None, cs.r if coupled else None)
    ystage = grid.scratch(f"rk4_stage_{m}", (m, n, n, n))

    k1 = _rhs_stacked(grid, y0)
    np.multiply(k1, 0.5 * dt, out=ystage)
    ystage += y0
    k2 = _rhs_stacked(grid, ystage)
    np.multiply(k2, 0.5 * dt, out=ystage)
    ystage += y0
    k3 = _rhs_stacked(grid, ystage)
    np.multiply(k3, dt, out=ystage)
    ystage += y0
    k4 = _rhs_stacked(grid, ystage)

    y1 = kernels.rk4_combine(y0, k1, k2, k3, k4, dt)
    uh = grid.fwd(y1[0:3])
    y1[0:3] = grid.inv(spectral.leray_project_spec(grid, uh, out=uh))
    _check_finite_stacked(y1)

    new_state = State(grid, state.time + dt, y1[0:3], y1[3:12].reshape(3, 3, n, n, n))
    if not coupled:
        return new_state, None
    from .curl_system import CurlState

    return new_state, CurlState(grid, state.time + dt, y1[12:15],
                                y1[15:24].reshape(3, 3, n, n, n))


def choose_dt(state: State, ctl: StepControl, grid: Grid) -> float:
    """CFL step: cfl * (2 pi / n) / (sup|u| + sum_k sup|F_k| + eps), clamped to t_end."""
    if ctl.mode != "cfl":
        raise ValueError("choose_dt applies to cfl mode only")
    speed = sup_norm(state.u) + sum(sup_norm(state.f[k]) for k in range(3))
    dt = ctl.cfl_number * (grid.length / grid.n) / (speed + EPS_FLOOR)
    return min(dt, ctl.t_end - state.time)


def tail_energy_fraction(state: State) -> float:
    """Fraction of fluctuation energy in the top third of the retained band.

    The mean (k=0) modes are excluded so the identity part of F does not
    mask spectral pile-up; returns 0 for states with no fluctuation energy.
    """
    grid = state.grid
    n = grid.n
    xh = grid.fwd(np.concatenate([state.u, state.f.reshape(9, n, n, n)]))
    energy = grid.spectral_energy(xh)
    energy[0, 0, 0] = 0.0
    total = float(energy.sum())
    if total <= 0.0:
        return 0.0
    kcut = grid.dealias_cutoff
    tail_lo = (2 * kcut) // 3
    keep1d = np.abs(grid.wavenumbers) <= kcut
    kz = np.arange(n // 2 + 1)
    in_band = keep1d[:, None, None] & keep1d[None, :, None] & (kz <= kcut)[None, None, :]
    big1d = np.abs(grid.wavenumbers) > tail_lo
    in_tail = big1d[:, None, None] | big1d[None, :, None] | (kz > tail_lo)[None, None, :]
    return float(energy[in_band & in_tail].sum() / total)
