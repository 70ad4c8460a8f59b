"""Pointwise hot loops, jitted with numba when available.

Set ``IVFLOW_NUMBA=0`` in the environment to force the pure-numpy fallback
path.  Every kernel has two implementations (``*_nb`` / ``*_np``) with
identical semantics; ``benchmarks/bench_kernels.py`` times the pair.

Array conventions (N = number of grid points, fields flattened):
  u   (3, N)        velocity components
  f   (3, 3, N)     f[k, c] = component c of deformation column k
  gu  (3, 3, N)     gu[j, c] = d u_c / d x_j
  gf  (3, 3, 3, N)  gf[j, k, c] = d f[k, c] / d x_j
  gw, gr            same shapes as gu, gf for the curl fields

The right-hand-side kernels write into caller-provided output blocks so the
stepping loop can reuse its buffers.
"""

import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

NUMBA_ENABLED = _HAVE_NUMBA and os.environ.get("IVFLOW_NUMBA", "1") != "0"

if _HAVE_NUMBA:
    _njit = numba.njit(cache=True, fastmath=True)
else:  # pragma: no cover
    def _njit(func):
        return func


# ---------------------------------------------------------------------------
# primary system: du = -(u.grad)u + sum_k (F_k.grad)F_k (un-projected),
#                 df_k = -(u.grad)F_k + (F_k.grad)u
# ---------------------------------------------------------------------------

def _primary_rhs_np(u, f, gu, gf, du, df):
    np.einsum("kjp,jkcp->cp", f, gf, out=du)
    du -= np.einsum("jp,jcp->cp", u, gu)
    np.einsum("kjp,jcp->kcp", f, gu, out=df)
    df -= np.einsum("jp,jkcp->kcp", u, gf)


@_njit
def _primary_rhs_nb(u, f, gu, gf, du, df):
    npts = u.shape[1]
    for c in range(3):
        for p in range(npts):
            acc = -(u[0, p] * gu[0, c, p] + u[1, p] * gu[1, c, p] + u[2, p] * gu[2, c, p])
            for k in range(3):
                acc += (f[k, 0, p] * gf[0, k, c, p]
                        + f[k, 1, p] * gf[1, k, c, p]
                        + f[k, 2, p] * gf[2, k, c, p])
            du[c, p] = acc
    for k in range(3):
        for c in range(3):
            for p in range(npts):
                df[k, c, p] = (
                    -(u[0, p] * gf[0, k, c, p] + u[1, p] * gf[1, k, c, p] + u[2, p] * gf[2, k, c, p])
                    + f[k, 0, p] * gu[0, c, p] + f[k, 1, p] * gu[1, c, p] + f[k, 2, p] * gu[2, c, p]
                )


# ---------------------------------------------------------------------------
# bilinear map a(X, Y) = sum_i (X^T e_i) x (Y e_i), lifted pointwise.
# gx[a, i] = d x_i / d x_a, so a_c = sum_i eps_cab gx[a, i] gy[i, b].
# ---------------------------------------------------------------------------

def _bilinear_np_flat(gx, gy):
    out = np.empty((3, gx.shape[2]))
    for c, a, b in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        out[c] = (gx[a] * gy[:, b]).sum(axis=0) - (gx[b] * gy[:, a]).sum(axis=0)
    return out


@_njit
def _bilinear_acc_nb(gx, gy, out, sgn):
    npts = gx.shape[2]
    for i in range(3):
        for p in range(npts):
            out[0, p] += sgn * (gx[1, i, p] * gy[i, 2, p] - gx[2, i, p] * gy[i, 1, p])
            out[1, p] += sgn * (gx[2, i, p] * gy[i, 0, p] - gx[0, i, p] * gy[i, 2, p])
            out[2, p] += sgn * (gx[0, i, p] * gy[i, 1, p] - gx[1, i, p] * gy[i, 0, p])


@_njit
def _bilinear_nb(gx, gy):
    out = np.zeros((3, gx.shape[2]))
    _bilinear_acc_nb(gx, gy, out, 1.0)
    return out


# ---------------------------------------------------------------------------
# curl system: dw = -(u.grad)w + sum_k (F_k.grad)r_k - S
#              dr_k = -(u.grad)r_k + (F_k.grad)w - T_k
# S = a(gu, gu) - sum_k a(gf_k, gf_k);  T_k = a(gu, gf_k) - a(gf_k, gu)
# ---------------------------------------------------------------------------

def _curl_rhs_np(u, f, gu, gf, gw, gr, dw, dr):
    np.einsum("kjp,jkcp->cp", f, gr, out=dw)
    dw -= np.einsum("jp,jcp->cp", u, gw)
    dw -= _bilinear_np_flat(gu, gu)
    for k in range(3):
        dw += _bilinear_np_flat(gf[:, k], gf[:, k])
    np.einsum("kjp,jcp->kcp", f, gw, out=dr)
    dr -= np.einsum("jp,jkcp->kcp", u, gr)
    for k in range(3):
        dr[k] -= _bilinear_np_flat(gu, gf[:, k]) - _bilinear_np_flat(gf[:, k], gu)


@_njit
def _curl_rhs_nb(u, f, gu, gf, gw, gr, dw, dr):
    npts = u.shape[1]
    # S = a(gu, gu) - sum_k a(gf_k, gf_k); T_k = a(gu, gf_k) - a(gf_k, gu)
    s = np.zeros((3, npts))
    _bilinear_acc_nb(gu, gu, s, 1.0)
    for k in range(3):
        gfk = np.ascontiguousarray(gf[:, k])
        _bilinear_acc_nb(gfk, gfk, s, -1.0)

    for c in range(3):
        for p in range(npts):
            acc = -(u[0, p] * gw[0, c, p] + u[1, p] * gw[1, c, p] + u[2, p] * gw[2, c, p])
            for k in range(3):
                acc += (f[k, 0, p] * gr[0, k, c, p]
                        + f[k, 1, p] * gr[1, k, c, p]
                        + f[k, 2, p] * gr[2, k, c, p])
            dw[c, p] = acc - s[c, p]

    t = np.empty((3, npts))
    for k in range(3):
        gfk = np.ascontiguousarray(gf[:, k])
        t[:] = 0.0
        _bilinear_acc_nb(gu, gfk, t, 1.0)
        _bilinear_acc_nb(gfk, gu, t, -1.0)
        for c in range(3):
            for p in range(npts):
                acc = -(u[0, p] * gr[0, k, c, p] + u[1, p] * gr[1, k, c, p]
                        + u[2, p] * gr[2, k, c, p])
                acc += (f[k, 0, p] * gw[0, c, p] + f[k, 1, p] * gw[1, c, p]
                        + f[k, 2, p] * gw[2, c, p])
                dr[k, c, p] = acc - t[c, p]


# ---------------------------------------------------------------------------
# small utilities
# ---------------------------------------------------------------------------

def _det3_np(f):
    c0, c1, c2 = f[0], f[1], f[2]
    return (c0[0] * (c1[1] * c2[2] - c1[2] * c2[1])
            - c0[1] * (c1[0] * c2[2] - c1[2] * c2[0])
            + c0[2] * (c1[0] * c2[1] - c1[1] * c2[0]))


@_njit
def _det3_nb(f):
    npts = f.shape[2]
    out = np.empty(npts)
    for p in range(npts):
        out[p] = (f[0, 0, p] * (f[1, 1, p] * f[2, 2, p] - f[1, 2, p] * f[2, 1, p])
                  - f[0, 1, p] * (f[1, 0, p] * f[2, 2, p] - f[1, 2, p] * f[2, 0, p])
                  + f[0, 2, p] * (f[1, 0, p] * f[2, 1, p] - f[1, 1, p] * f[2, 0, p]))
    return out


def _max_magnitude_np(v):
    return float(np.sqrt((v * v).sum(axis=0).max()))


@_njit
def _max_magnitude_nb(v):
    m, npts = v.shape
    best = 0.0
    for p in range(npts):
        acc = 0.0
        for q in range(m):
            acc += v[q, p] * v[q, p]
        if acc > best:
            best = acc
    return np.sqrt(best)


def _rk4_combine_np(y0, k1, k2, k3, k4, dt, out):
    np.multiply(k2 + k3, 2.0, out=out)
    out += k1
    out += k4
    out *= dt / 6.0
    out += y0


@_njit
def _rk4_combine_nb(y0, k1, k2, k3, k4, dt, out):
    y = y0.reshape(-1)
    a = k1.reshape(-1)
    b = k2.reshape(-1)
    c = k3.reshape(-1)
    d = k4.reshape(-1)
    o = out.reshape(-1)
    h = dt / 6.0
    for p in range(y.size):
        o[p] = y[p] + h * (a[p] + 2.0 * (b[p] + c[p]) + d[p])


# public dispatchers -------------------------------------------------------

def primary_rhs(u, f, gu, gf, du, df):
    if NUMBA_ENABLED:
        _primary_rhs_nb(u, f, gu, gf, du, df)
    else:
        _primary_rhs_np(u, f, gu, gf, du, df)


def curl_rhs(u, f, gu, gf, gw, gr, dw, dr):
    if NUMBA_ENABLED:
        _curl_rhs_nb(u, f, gu, gf, gw, gr, dw, dr)
    else:
        _curl_rhs_np(u, f, gu, gf, gw, gr, dw, dr)


def bilinear_field(gx, gy):
    """a(X, Y) lifted over flattened points: (3,3,N),(3,3,N) -> (3,N)."""
    if NUMBA_ENABLED:
        return _bilinear_nb(np.ascontiguousarray(gx), np.ascontiguousarray(gy))
    return _bilinear_np_flat(gx, gy)


def det3(f):
    """Determinant of the 3x3 matrix whose columns are f[0], f[1], f[2]."""
    if NUMBA_ENABLED:
        return _det3_nb(f)
    return _det3_np(f)


def max_magnitude(v):
    """max over points of the euclidean magnitude of the stacked components."""
    if NUMBA_ENABLED:
        return float(_max_magnitude_nb(v))
    return _max_magnitude_np(v)


def rk4_combine(y0, k1, k2, k3, k4, dt, out=None):
    if out is None:
        out = np.empty_like(y0)
    if NUMBA_ENABLED:
        _rk4_combine_nb(y0, k1, k2, k3, k4, dt, out)
    else:
        _rk4_combine_np(y0, k1, k2, k3, k4, dt, out)
    return out
