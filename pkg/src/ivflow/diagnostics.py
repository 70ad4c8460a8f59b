"""Runtime diagnostics: the blowup-criterion accumulator, log-Sobolev check,
Gronwall quantity, exponential bound monitors and per-output-time records.

Universal constants in the monitored inequalities are never assumed: surveys
fit them empirically and the bound monitors report the implied constant of
each run.
"""

import math
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from . import spectral
from .curl_system import CurlState, SurveyReport
from .fields import (State, determinant_field, l2_norm, sobolev_norm,
                     sup_norm, random_divfree, total_energy)
from .spectral import Grid

KATO_DIV_TOL = 1e-8  # inequality requires a divergence-free field

CSV_COLUMNS = (
    "time", "energy", "sup_div_u", "sup_div_f", "sup_w",
    "sup_r1", "sup_r2", "sup_r3", "l2_w", "l2_r1", "l2_r2", "l2_r3",
    "h3_u", "h3_f1", "h3_f2", "h3_f3", "bkm_m", "gronwall_y",
    "kato_lhs", "kato_bracket", "det_min", "det_max", "tail_energy_fraction",
)


@dataclass
class DiagnosticsRecord:
    time: float
    energy: float
    sup_div_u: float
    sup_div_f: float
    sup_w: float
    sup_r1: float
    sup_r2: float
    sup_r3: float
    l2_w: float
    l2_r1: float
    l2_r2: float
    l2_r3: float
    h3_u: float
    h3_f1: float
    h3_f2: float
    h3_f3: float
    bkm_m: float
    gronwall_y: float
    kato_lhs: float
    kato_bracket: float
    det_min: float
    det_max: float
    tail_energy_fraction: float

    def row(self):
        return [getattr(self, name) for name in CSV_COLUMNS]

    @property
    def bkm_integrand(self) -> float:
        return self.sup_w + self.sup_r1 + self.sup_r2 + self.sup_r3

    @property
    def kato_ratio(self) -> float:
        return self.kato_lhs / self.kato_bracket


assert tuple(f.name for f in dc_fields(DiagnosticsRecord)) == CSV_COLUMNS


def bkm_accumulate(prev_m: float, prev_integrand: float,
                   cur_integrand: float, dt: float) -> float:
    """Trapezoidal update of the running curl sup-norm integral."""
    if prev_integrand < 0 or cur_integrand < 0:
        raise ValueError("integrand is a sum of norms and cannot be negative")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return prev_m + 0.5 * dt * (prev_integrand + cur_integrand)


def gronwall_y(h3_u: float, h3_f_sum: float) -> float:
    """ln(|u|_H3 + e) + ln(sum_k |F_k|_H3 + e)."""
    if h3_u < 0 or h3_f_sum < 0:
        raise ValueError("norms must be nonnegative")
    return math.log(h3_u + math.e) + math.log(h3_f_sum + math.e)


def ln_plus(x: float) -> float:
    return math.log(x) if x > 1.0 else 0.0


def kato_check(grid: Grid, v: np.ndarray):
    """(lhs, bracket, ratio) of the log-Sobolev gradient bound for div-free v.

    lhs is the sup norm of the full gradient tensor; the bracket is
    1 + (1 + ln+ |v|_H3) |curl v|_Linf + |curl v|_L2.
    """
    div_sup = float(np.abs(spectral.divergence(grid, v)).max())
    if div_sup >= KATO_DIV_TOL:
        raise ValueError(
            f"kato_check requires a divergence-free field (sup|div| = {div_sup:.3e})"
        )
    grad = spectral.gradient_tensor(grid, v)
    lhs = sup_norm(grad.reshape(9, *v.shape[1:]))
    cv = spectral.curl(grid, v)
    bracket = 1.0 + (1.0 + ln_plus(sobolev_norm(grid, v, 3))) * sup_norm(cv) + l2_norm(cv)
    return lhs, bracket, lhs / bracket


def kato_survey(ensemble_size: int, seed: int, grid: Grid) -> SurveyReport:
    """Ratio statistics of the gradient bound over random divergence-free fields."""
    if ensemble_size < 1:
        raise ValueError("ensemble_size must be >= 1")
    ratios = np.empty(ensemble_size)
    for i in range(ensemble_size):
        v = random_divfree(grid, (seed, i))
        ratios[i] = kato_check(grid, v)[2]
    counts, edges = np.histogram(ratios, bins=10, range=(0.0, max(ratios.max(), 1e-300)))
    return SurveyReport("kato_gradient_bound", grid.n, ensemble_size, seed,
                        float(ratios.max()), float(ratios.mean()), edges, counts)


def exp_bound_check(times, lhs_series, integrand_series):
    """Implied constant of lhs(t) <= lhs(0) * exp(C * integral of integrand).

    Returns (lhs_final, exponent_integral_final, implied_c_final) with the
    integral taken by the trapezoidal rule over the given history; the
    implied constant is ln(lhs/lhs0)/integral when both are positive, else 0.
    """
    times = np.asarray(times, dtype=float)
    lhs = np.asarray(lhs_series, dtype=float)
    integrand = np.asarray(integrand_series, dtype=float)
    if times.size == 0:
        raise ValueError("empty history")
    if times.size == 1:
        return float(lhs[0]), 0.0, 0.0
    integral = float(np.trapezoid(integrand, times))
    ratio = lhs[-1] / lhs[0] if lhs[0] > 0 else 0.0
    implied = math.log(ratio) / integral if (ratio > 0 and integral > 0) else 0.0
    return float(lhs[-1]), integral, implied


def energy_bound_lhs(record: DiagnosticsRecord) -> float:
    """|u|_H3^2 + sum_k |F_k|_H3^2 from one record."""
    return record.h3_u**2 + record.h3_f1**2 + record.h3_f2**2 + record.h3_f3**2


def curl_bound_lhs(record: DiagnosticsRecord) -> float:
    """|w|_L2^2 + sum_k |r_k|_L2^2 from one record."""
    return record.l2_w**2 + record.l2_r1**2 + record.l2_r2**2 + record.l2_r3**2


def energy_bound_check(records, grad_integrand):
    """Bound monitor for the H3 energy estimate along a run history."""
    times = [rec.time for rec in records]
    return exp_bound_check(times, [energy_bound_lhs(r) for r in records], grad_integrand)


def curl_l2_bound_check(records):
    """Bound monitor for the curl L2 estimate; the exponent integrand is the
    same curl sup-norm sum that feeds the blowup accumulator."""
    times = [rec.time for rec in records]
    return exp_bound_check(times, [curl_bound_lhs(r) for r in records],
                           [r.bkm_integrand for r in records])


def compute_record(state: State, cs: CurlState | None, sobolev_s: int,
                   prev: DiagnosticsRecord | None):
    """Assemble one output row plus internal extras (gradient sup integrand).

    The curl columns always describe the curls of the state itself; the
    co-evolved curl state is compared against them elsewhere.
    """
    grid = state.grid
    n = grid.n
    stack = np.concatenate([state.u, state.f.reshape(9, n, n, n)])
    xh = grid.fwd(stack)
    xh4 = xh.reshape(4, 3, n, n, n // 2 + 1)

    curls = grid.inv(spectral.curl_spec(grid, xh4))
    divs = grid.inv(grid._ikx * xh4[:, 0] + grid._iky * xh4[:, 1] + grid._ikz * xh4[:, 2])
    grads = grid.inv(grid.grad_spec(xh))   # (3, 12, n, n, n)

    weights = (1.0 + grid._k2_r) ** sobolev_s
    h3 = np.empty(4)
    for i in range(4):
        e = grid.spectral_energy(xh[3 * i:3 * i + 3])
        h3[i] = math.sqrt((2.0 * np.pi) ** 3 * float((e * weights).sum()))

    sup_w = sup_norm(curls[0])
    sup_r = [sup_norm(curls[1 + k]) for k in range(3)]
    l2_w = l2_norm(curls[0])
    l2_r = [l2_norm(curls[1 + k]) for k in range(3)]

    grad_u = np.ascontiguousarray(grads[:, 0:3]).reshape(9, n, n, n)
    kato_lhs = sup_norm(grad_u)
    grad_sup_sum = kato_lhs
    kato_ratio_f = []
    for k in range(3):
        gk = np.ascontiguousarray(grads[:, 3 + 3 * k:6 + 3 * k]).reshape(9, n, n, n)
        lhs_k = sup_norm(gk)
        grad_sup_sum += lhs_k
        bracket_k = 1.0 + (1.0 + ln_plus(h3[1 + k])) * sup_r[k] + l2_r[k]
        kato_ratio_f.append(lhs_k / bracket_k)
    kato_bracket = 1.0 + (1.0 + ln_plus(h3[0])) * sup_w + l2_w

    det = determinant_field(state.f)
    integrand = sup_w + sum(sup_r)
    if prev is None:
        bkm_m = 0.0
    else:
        bkm_m = bkm_accumulate(prev.bkm_m, prev.bkm_integrand, integrand,
                               state.time - prev.time)

    from .dynamics import tail_energy_fraction

    rec = DiagnosticsRecord(
        time=state.time,
        energy=total_energy(state),
        sup_div_u=float(np.abs(divs[0]).max()),
        sup_div_f=float(np.abs(divs[1:4]).max()),
        sup_w=sup_w,
        sup_r1=sup_r[0], sup_r2=sup_r[1], sup_r3=sup_r[2],
        l2_w=l2_w,
        l2_r1=l2_r[0], l2_r2=l2_r[1], l2_r3=l2_r[2],
        h3_u=h3[0], h3_f1=h3[1], h3_f2=h3[2], h3_f3=h3[3],
        bkm_m=bkm_m,
        gronwall_y=gronwall_y(h3[0], h3[1] + h3[2] + h3[3]),
        kato_lhs=kato_lhs,
        kato_bracket=kato_bracket,
        det_min=float(det.min()),
        det_max=float(det.max()),
        tail_energy_fraction=tail_energy_fraction(state),
    )
    return rec, {"grad_sup_integrand": grad_sup_sum,
                 "kato_ratio_f": tuple(kato_ratio_f)}
