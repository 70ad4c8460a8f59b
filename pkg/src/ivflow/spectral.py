"""Fourier machinery on the periodic box [0, 2*pi)^3.

Fields are real numpy arrays indexed ``[ix, iy, iz]`` (x varies fastest in
Fortran/column-major order), optionally with leading stack axes for vector
components or batched operations.  Every forward transform is normalized by
``n**3`` so the k=0 coefficient is the field mean and Parseval reads
``sum_k |f_k|^2 = mean(|f|^2)``.

Derivative multipliers zero the Nyquist mode (k = n/2) so derivatives of
real fields stay real; even-order multipliers (Poisson inversion, Sobolev
weights) keep the full k^2 there.
"""

import numpy as np
import scipy.fft as _fft

# Tolerances assume double precision; shared by tests and runtime guards.
MEAN_TOL = 1e-10        # largest |mean| accepted by solve_poisson
PROJECTION_TOL = 1e-12  # divergence bound guaranteed by leray_project

_WORKERS = 2


class Grid:
    """Wavenumber tables, dealias masks and transform helpers for one n."""

    def __init__(self, n: int):
        if n < 8 or n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got {n}")
        self.n = n
        self.length = 2.0 * np.pi

        # Integer frequencies per dimension; the Nyquist bin is stored as +n/2.
        k = np.fft.fftfreq(n, 1.0 / n).astype(np.int64)
        k[n // 2] = n // 2
        self.wavenumbers = k

        kd = k.copy()
        kd[n // 2] = 0  # odd-derivative multiplier: Nyquist zeroed

        kcut = n // 3
        keep1d = np.abs(k) <= kcut
        self.dealias_cutoff = kcut
        self.dealias_mask = (
            keep1d[:, None, None] & keep1d[None, :, None] & keep1d[None, None, :]
        )

        # Real-transform layout: last axis holds kz = 0..n/2.
        nz = n // 2 + 1
        kz = np.arange(nz)
        kdz = kz.copy()
        kdz[-1] = 0

        self._ikx = (1j * kd.astype(np.float64))[:, None, None]
        self._iky = (1j * kd.astype(np.float64))[None, :, None]
        self._ikz = (1j * kdz.astype(np.float64))[None, None, :]

        k2 = k.astype(np.float64) ** 2
        self._k2_r = k2[:, None, None] + k2[None, :, None] + (kz.astype(np.float64) ** 2)[None, None, :]
        self._mask_r = (
            keep1d[:, None, None] & keep1d[None, :, None] & (kz <= kcut)[None, None, :]
        )

        # Parseval weights for the half spectrum: interior kz planes count twice.
        w = np.full(nz, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self._parseval_r = w[None, None, :]

        # Leray projection scale 1/|k_d|^2 with pass-through where the
        # derivative multiplier vanishes (mean and pure-Nyquist modes).
        kdx = self._ikx.imag
        kdy = self._iky.imag
        kdz_ = self._ikz.imag
        kd2 = kdx**2 + kdy**2 + kdz_**2
        self._proj_scale = np.where(kd2 > 0, 1.0 / np.where(kd2 > 0, kd2, 1.0), 0.0)

        k2_inv = self._k2_r.copy()
        k2_inv[0, 0, 0] = 1.0
        self._poisson_inv = 1.0 / k2_inv
        self._poisson_inv[0, 0, 0] = 0.0

        self._points = None
        self._scratch = {}

    def scratch(self, key: str, shape, dtype=np.float64) -> np.ndarray:
        """Reusable work buffer for the sequential stepping path.

        Callers own the buffer only until the next request for the same key;
        the concurrent-safe public operations never use these.
        """
        arr = self._scratch.get(key)
        if arr is None or arr.shape != tuple(shape) or arr.dtype != dtype:
            arr = np.empty(shape, dtype=dtype)
            self._scratch[key] = arr
        return arr

    def points(self):
        """Mesh coordinate arrays (X, Y, Z), each shape (n, n, n)."""
        if self._points is None:
            x = np.arange(self.n) * (self.length / self.n)
            self._points = np.meshgrid(x, x, x, indexing="ij")
        return self._points

    def fwd(self, arr: np.ndarray) -> np.ndarray:
        """Real-to-half-complex transform over the trailing three axes."""
        return _fft.rfftn(arr, axes=(-3, -2, -1), norm="forward", workers=_WORKERS)

    def inv(self, spec: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`fwd`."""
        return _fft.irfftn(spec, s=(self.n,) * 3, axes=(-3, -2, -1),
                           norm="forward", workers=_WORKERS)

    def grad_spec(self, spec: np.ndarray) -> np.ndarray:
        """Stack (d/dx, d/dy, d/dz) applied in spectral space."""
        return self.grad_spec_into(spec, np.empty((3,) + spec.shape, dtype=spec.dtype))

    def grad_spec_into(self, spec: np.ndarray, out: np.ndarray) -> np.ndarray:
        np.multiply(spec, self._ikx, out=out[0])
        np.multiply(spec, self._iky, out=out[1])
        np.multiply(spec, self._ikz, out=out[2])
        return out

    def spectral_energy(self, spec: np.ndarray) -> np.ndarray:
        """Parseval-weighted |coefficient|^2 summed over any leading axes."""
        mag = (spec.real**2 + spec.imag**2) * self._parseval_r
        if mag.ndim > 3:
            mag = mag.sum(axis=tuple(range(mag.ndim - 3)))
        return mag


def forward_transform(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Full complex coefficients of a real field, mean in the k=0 bin."""
    if not np.isfinite(f).all():
        raise ValueError("forward_transform: input field contains non-finite values")
    return _fft.fftn(f, axes=(-3, -2, -1), norm="forward", workers=_WORKERS)


def inverse_transform(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return _fft.ifftn(coeffs, axes=(-3, -2, -1), norm="forward", workers=_WORKERS).real


def dealias(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Zero every mode with any |k_i| above the 2/3-rule cutoff."""
    return coeffs * grid.dealias_mask


def gradient(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Spectral gradient of a scalar field, shape (3, n, n, n)."""
    return grid.inv(grid.grad_spec(grid.fwd(f)))


def gradient_tensor(grid: Grid, v: np.ndarray) -> np.ndarray:
    """g[j, c] = d v_c / d x_j for a vector field v of shape (3, n, n, n)."""
    return grid.inv(grid.grad_spec(grid.fwd(v)))


def divergence(grid: Grid, v: np.ndarray) -> np.ndarray:
    vh = grid.fwd(v)
    return grid.inv(grid._ikx * vh[0] + grid._iky * vh[1] + grid._ikz * vh[2])


def divergence_spec(grid: Grid, vh: np.ndarray) -> np.ndarray:
    return grid._ikx * vh[0] + grid._iky * vh[1] + grid._ikz * vh[2]


def curl_spec(grid: Grid, vh: np.ndarray) -> np.ndarray:
    ikx, iky, ikz = grid._ikx, grid._iky, grid._ikz
    return np.stack([
        iky * vh[..., 2, :, :, :] - ikz * vh[..., 1, :, :, :],
        ikz * vh[..., 0, :, :, :] - ikx * vh[..., 2, :, :, :],
        ikx * vh[..., 1, :, :, :] - iky * vh[..., 0, :, :, :],
    ], axis=-4)


def curl(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Spectral curl; v may carry leading stack axes before the component axis."""
    return grid.inv(curl_spec(grid, grid.fwd(v)))


def leray_project_spec(grid: Grid, vh: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Remove the gradient part mode by mode; modes with zero multiplier pass through."""
    kx = grid._ikx.imag
    ky = grid._iky.imag
    kz = grid._ikz.imag
    kdotv = (kx * vh[0] + ky * vh[1] + kz * vh[2]) * grid._proj_scale
    if out is None:
        out = vh.copy()
    elif out is not vh:
        out[:] = vh
    out[0] -= kx * kdotv
    out[1] -= ky * kdotv
    out[2] -= kz * kdotv
    return out


def leray_project(grid: Grid, v: np.ndarray) -> np.ndarray:
    return grid.inv(leray_project_spec(grid, grid.fwd(v)))


def solve_poisson(grid: Grid, g: np.ndarray) -> np.ndarray:
    """Mean-zero p with -laplacian(p) = g; rejects nonzero-mean input."""
    mean = float(g.mean())
    if abs(mean) >= MEAN_TOL:
        raise ValueError(
            f"solve_poisson: right-hand side has mean {mean:.3e}; "
            "no periodic solution exists for nonzero-mean input"
        )
    return grid.inv(grid.fwd(g) * grid._poisson_inv)


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    return grid.inv(-grid._k2_r * grid.fwd(f))
