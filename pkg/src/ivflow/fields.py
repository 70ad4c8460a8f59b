"""State containers, initial-condition generators and field norms.

A velocity field is an array of shape (3, n, n, n); the deformation tensor
is stored column-wise as (3, 3, n, n, n) with ``f[k, c]`` the c-th component
of the k-th column.  States are immutable snapshots: stepping returns new
objects.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, spectral
from .spectral import Grid

BOX_VOLUME = (2.0 * np.pi) ** 3
INITIAL_DIV_TOL = 1e-10   # divergence bound guaranteed by make_initial
STATE_DIV_TOL = 1e-8      # divergence bound required of any live State
SOBOLEV_S_MAX = 6

KINDS = ("taylor_green", "abc_flow", "random_band_limited", "from_checkpoint")


@dataclass
class InitialCondition:
    kind: str
    amplitude: float = 1.0
    f_perturbation_amplitude: float = 0.0
    spectrum_exponent: float = -2.0
    seed: int = 0
    path: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown initial-condition kind '{self.kind}'")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")


@dataclass
class State:
    """Time plus (u, F) on one grid."""
    grid: Grid
    time: float
    u: np.ndarray                    # (3, n, n, n)
    f: np.ndarray                    # (3, 3, n, n, n), columns first

    def copy(self) -> "State":
        return State(self.grid, self.time, self.u.copy(), self.f.copy())


def taylor_green(grid: Grid, amplitude: float = 1.0) -> np.ndarray:
    x, y, z = grid.points()
    u = np.empty((3, grid.n, grid.n, grid.n))
    u[0] = np.sin(x) * np.cos(y) * np.cos(z)
    u[1] = -np.cos(x) * np.sin(y) * np.cos(z)
    u[2] = 0.0
    return amplitude * u


def abc_flow(grid: Grid, amplitude: float = 1.0) -> np.ndarray:
    x, y, z = grid.points()
    u = np.empty((3, grid.n, grid.n, grid.n))
    u[0] = np.sin(z) + np.cos(y)
    u[1] = np.sin(x) + np.cos(z)
    u[2] = np.sin(y) + np.cos(x)
    return amplitude * u


def random_divfree(grid: Grid, seed, exponent: float = -2.0,
                   kmax: int | None = None) -> np.ndarray:
    """Divergence-free, mean-zero random field with |k|^exponent spectrum.

    Built from real white noise (so Hermitian symmetry is automatic), shaped
    in spectral space, band-limited to |k_i| <= kmax (the dealias cutoff by
    default), Leray-projected and normalized to unit L2 norm.
    """
    if kmax is None:
        kmax = grid.dealias_cutoff
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((3, grid.n, grid.n, grid.n))
    vh = grid.fwd(white)

    k = grid.wavenumbers.astype(np.float64)
    nz = grid.n // 2 + 1
    kzv = np.arange(nz, dtype=np.float64)
    kk = np.sqrt(k[:, None, None] ** 2 + k[None, :, None] ** 2 + kzv[None, None, :] ** 2)
    keep1d = np.abs(grid.wavenumbers) <= kmax
    band = keep1d[:, None, None] & keep1d[None, :, None] & (kzv <= kmax)[None, None, :]
    amp = np.zeros_like(kk)
    np.power(kk, exponent, out=amp, where=kk > 0)
    amp *= band

    vh *= amp
    vh = spectral.leray_project_spec(grid, vh)
    v = grid.inv(vh)
    norm = l2_norm(v)
    if norm > 0:
        v /= norm
    return v


def random_scalar(grid: Grid, seed, exponent: float = -2.0,
                  kmax: int | None = None) -> np.ndarray:
    """Mean-zero band-limited random scalar with |k|^exponent spectrum, unit L2."""
    if kmax is None:
        kmax = grid.dealias_cutoff
    rng = np.random.default_rng(seed)
    fh = grid.fwd(rng.standard_normal((grid.n, grid.n, grid.n)))

    k = grid.wavenumbers.astype(np.float64)
    kzv = np.arange(grid.n // 2 + 1, dtype=np.float64)
    kk = np.sqrt(k[:, None, None] ** 2 + k[None, :, None] ** 2 + kzv[None, None, :] ** 2)
    keep1d = np.abs(grid.wavenumbers) <= kmax
    band = keep1d[:, None, None] & keep1d[None, :, None] & (kzv <= kmax)[None, None, :]
    amp = np.zeros_like(kk)
    np.power(kk, exponent, out=amp, where=kk > 0)
    fh *= amp * band

    f = grid.inv(fh)
    norm = l2_norm(f)
    if norm > 0:
        f /= norm
    return f


def identity_deformation(grid: Grid) -> np.ndarray:
    f = np.zeros((3, 3, grid.n, grid.n, grid.n))
    for k in range(3):
        f[k, k] = 1.0
    return f


def sup_div(grid: Grid, v: np.ndarray) -> float:
    return float(np.abs(spectral.divergence(grid, v)).max())


def make_initial(ic: InitialCondition, grid: Grid) -> State:
    """Build a State satisfying both divergence invariants.

    F defaults to the identity plus a divergence-free perturbation of the
    requested amplitude; u is the named flow scaled by ``ic.amplitude``.
    Both are Leray-projected.
    """
    if ic.kind == "from_checkpoint":
        from .io_utils import read_checkpoint

        state = read_checkpoint(ic.path)
        if state.grid.n != grid.n:
            raise ValueError(
                f"checkpoint resolution n={state.grid.n} does not match grid n={grid.n}"
            )
        _validate_state(state, STATE_DIV_TOL)
        return state

    if ic.kind == "taylor_green":
        u = taylor_green(grid, ic.amplitude)
    elif ic.kind == "abc_flow":
        u = abc_flow(grid, ic.amplitude)
    elif ic.kind == "random_band_limited":
        u = ic.amplitude * random_divfree(grid, ic.seed, ic.spectrum_exponent)
    else:  # pragma: no cover - guarded by InitialCondition
        raise ValueError(f"unknown initial-condition kind '{ic.kind}'")
    u = spectral.leray_project(grid, u)

    f = identity_deformation(grid)
    if ic.f_perturbation_amplitude != 0.0:
        for k in range(3):
            pert = random_divfree(grid, (ic.seed, 17 + k))
            f[k] += ic.f_perturbation_amplitude * pert
            f[k] = spectral.leray_project(grid, f[k])

    state = State(grid, 0.0, u, f)
    _validate_state(state, INITIAL_DIV_TOL)
    return state


def _validate_state(state: State, div_tol: float) -> None:
    if not (np.isfinite(state.u).all() and np.isfinite(state.f).all()):
        raise ValueError("state contains non-finite values")
    if sup_div(state.grid, state.u) >= div_tol:
        raise ValueError("velocity field is not divergence-free")
    for k in range(3):
        if sup_div(state.grid, state.f[k]) >= div_tol:
            raise ValueError(f"deformation column {k + 1} is not divergence-free")


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def l2_norm(v: np.ndarray) -> float:
    """Continuum L2 norm via the (spectrally exact) grid quadrature."""
    flat = v.reshape(-1)
    npts = v.shape[-1] * v.shape[-2] * v.shape[-3]
    return float(np.sqrt(BOX_VOLUME * flat.dot(flat) / npts))


def sup_norm(v: np.ndarray) -> float:
    """Max over grid points of the euclidean magnitude."""
    if v.ndim == 3:
        v = v[None]
    npts = v.shape[-1] * v.shape[-2] * v.shape[-3]
    return kernels.max_magnitude(np.ascontiguousarray(v).reshape(-1, npts))


def sobolev_norm(grid: Grid, v: np.ndarray, s: int) -> float:
    """Inhomogeneous H^s norm with multiplier (1 + |k|^2)^s."""
    if not 0 <= s <= SOBOLEV_S_MAX:
        raise ValueError(f"sobolev order must be in [0, {SOBOLEV_S_MAX}], got {s}")
    vh = grid.fwd(v)
    weights = (1.0 + grid._k2_r) ** s
    total = float((grid.spectral_energy(vh) * weights).sum())
    return float(np.sqrt(BOX_VOLUME * total))


def determinant_field(f: np.ndarray) -> np.ndarray:
    """Pointwise determinant of the deformation tensor (columns f[k])."""
    shape = f.shape[2:]
    npts = shape[0] * shape[1] * shape[2]
    return kernels.det3(np.ascontiguousarray(f).reshape(3, 3, npts)).reshape(shape)


def total_energy(state: State) -> float:
    """E = (|u|_L2^2 + sum_k |F_k|_L2^2) / 2."""
    return 0.5 * (l2_norm(state.u) ** 2 + l2_norm(state.f) ** 2)
