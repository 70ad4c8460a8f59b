"""Built-in verification suite behind the ``check`` CLI subcommand.

Each check pins its tolerance here; the acceptance tests reuse these
functions so the command line and the test suite cannot drift apart.
"""

import tempfile
from dataclasses import dataclass

import numpy as np

from . import spectral
from .config import RunConfig
from .curl_system import (curl_advection_identity_residual, curl_consistency_error,
                          moser_ratio, moser_ratio_survey)
from .driver import RunResult, run
from .dynamics import StepControl
from .fields import InitialCondition, random_divfree, random_scalar, taylor_green
from .spectral import Grid

RICHARDSON_WINDOW = (12.8, 19.2)   # 16 +- 20%
ROUNDOFF_FLOOR = 1e-10             # below this a convergence ratio is noise

CHECK_IC = InitialCondition("taylor_green", amplitude=1.0,
                            f_perturbation_amplitude=0.1, seed=7)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class CheckContext:
    grid: Grid
    run_main: RunResult       # dt = 1e-3, t in [0, 1], co-evolved through t = 0.5
    run_coarse_dt: RunResult  # dt = 2e-3, t in [0, 0.5], fully co-evolved
    moser_small: object
    moser_big: object


def build_context(n: int = 32, workdir: str | None = None) -> CheckContext:
    if workdir is None:
        workdir = tempfile.mkdtemp(prefix="ivflow_check_")
    grid = Grid(n)
    cfg_main = RunConfig(
        grid_n=n, initial=CHECK_IC,
        step=StepControl(mode="fixed_dt", dt=1e-3, t_end=1.0),
        output_path=f"{workdir}/check_main.csv", output_every=10,
    )
    cfg_coarse_dt = RunConfig(
        grid_n=n, initial=CHECK_IC,
        step=StepControl(mode="fixed_dt", dt=2e-3, t_end=0.5),
        output_path=f"{workdir}/check_coarse_dt.csv", output_every=5,
    )
    run_main = run(cfg_main, record_fine_integrand=True, snapshot_times=(0.5,),
                   couple_until=0.5)
    run_coarse_dt = run(cfg_coarse_dt)
    return CheckContext(
        grid=grid,
        run_main=run_main,
        run_coarse_dt=run_coarse_dt,
        moser_small=moser_ratio_survey(100, seed=11, grid=grid),
        moser_big=moser_ratio_survey(200, seed=11, grid=grid),
    )


def check_spectral_correctness(n: int = 32) -> CheckResult:
    tol = 1e-12
    grid = Grid(n)
    x, y, z = grid.points()
    worst = 0.0

    grad = spectral.gradient(grid, np.sin(x))
    worst = max(worst, float(np.abs(grad[0] - np.cos(x)).max()),
                float(np.abs(grad[1]).max()), float(np.abs(grad[2]).max()))

    v = np.zeros((3, n, n, n))
    v[2] = np.sin(x)
    cv = spectral.curl(grid, v)
    worst = max(worst, float(np.abs(cv[0]).max()),
                float(np.abs(cv[1] + np.cos(x)).max()), float(np.abs(cv[2]).max()))

    tg = taylor_green(grid)
    ctg = spectral.curl(grid, tg)
    exact = np.stack([-np.cos(x) * np.sin(y) * np.sin(z),
                      -np.sin(x) * np.cos(y) * np.sin(z),
                      2.0 * np.sin(x) * np.sin(y) * np.cos(z)])
    worst = max(worst, float(np.abs(ctg - exact).max()))
    worst = max(worst, float(np.abs(spectral.divergence(grid, tg)).max()))

    shear = np.zeros((3, n, n, n))
    shear[0] = np.sin(y)
    worst = max(worst, float(np.abs(spectral.divergence(grid, shear)).max()))

    gradient_field = spectral.gradient(grid, np.sin(x) * np.cos(2 * y))
    worst = max(worst, float(np.abs(spectral.leray_project(grid, gradient_field)).max()))
    worst = max(worst, float(np.abs(spectral.leray_project(grid, tg) - tg).max()))

    return CheckResult(
        "spectral_correctness", worst < tol,
        f"max deviation {worst:.3e} (tol {tol:.0e})")


def check_energy_conservation(ctx: CheckContext) -> CheckResult:
    tol = 1e-6
    drift = ctx.run_main.summary["energy_drift_rel"]
    return CheckResult(
        "energy_conservation",
        ctx.run_main.status == "completed" and drift <= tol,
        f"relative drift {drift:.3e} over t in [0,1] (tol {tol:.0e})")


def check_divergence_propagation(ctx: CheckContext) -> CheckResult:
    tol = 1e-8
    worst = max(rec.sup_div_f for rec in ctx.run_main.records)
    worst_u = max(rec.sup_div_u for rec in ctx.run_main.records)
    return CheckResult(
        "divergence_propagation", worst < tol and worst_u < tol,
        f"sup div F {worst:.3e}, sup div u {worst_u:.3e} (tol {tol:.0e})")


def check_curl_advection_identity(n: int = 32, trials: int = 100) -> CheckResult:
    tol = 1e-10
    grid = Grid(n)
    kmax = n // 6
    worst = 0.0
    for i in range(trials):
        u = random_divfree(grid, (1000 + i, 0), kmax=kmax)
        v = random_divfree(grid, (1000 + i, 1), kmax=kmax)
        worst = max(worst, curl_advection_identity_residual(grid, u, v))
    return CheckResult(
        "curl_advection_identity", worst < tol,
        f"max residual {worst:.3e} over {trials} pairs (tol {tol:.0e})")


def check_formulation_consistency(ctx: CheckContext) -> CheckResult:
    """Co-evolved curls against curls of the state at t = 0.5.

    The refinement pair is (dt = 2e-3, dt = 1e-3): the stated dt is the
    fine member.  With band-limited states the two formulations commute
    discretely, so both differences normally sit at the roundoff floor,
    where a decay ratio is unmeasurable and the order-4 bound is vacuous.
    """
    tol = 1e-6
    snap_state, snap_cs = ctx.run_main.snapshots[0.5]
    diff_fine = curl_consistency_error(snap_state, snap_cs)
    diff_coarse = curl_consistency_error(ctx.run_coarse_dt.final_state,
                                         ctx.run_coarse_dt.final_curl_state)
    if diff_fine >= tol:
        return CheckResult("formulation_consistency", False,
                           f"L2 difference {diff_fine:.3e} at t=0.5 (tol {tol:.0e})")
    if min(diff_fine, diff_coarse) <= ROUNDOFF_FLOOR:
        return CheckResult(
            "formulation_consistency", True,
            f"L2 difference {diff_fine:.3e} at dt=1e-3, {diff_coarse:.3e} at dt=2e-3; "
            "both at the roundoff floor, so the order-4 decay bound holds vacuously")
    ratio = diff_coarse / diff_fine
    ok = RICHARDSON_WINDOW[0] <= ratio <= RICHARDSON_WINDOW[1]
    return CheckResult(
        "formulation_consistency", ok,
        f"L2 difference {diff_fine:.3e}; refinement ratio {ratio:.2f} "
        f"(window {RICHARDSON_WINDOW})")


def check_moser_survey(ctx: CheckContext) -> CheckResult:
    stability_tol = 0.10
    scale_tol = 1e-12
    small, big = ctx.moser_small, ctx.moser_big
    finite = np.isfinite(small.ratio_max) and np.isfinite(big.ratio_max)
    change = abs(big.ratio_max - small.ratio_max) / small.ratio_max

    grid = ctx.grid
    f = random_scalar(grid, (99, 0))
    g = random_scalar(grid, (99, 1))
    scale_err = 0.0
    for alpha in ((1, 0, 0), (1, 1, 1), (0, 0, 3), (2, 1, 0)):
        r1 = moser_ratio(grid, f, g, alpha)
        r10 = moser_ratio(grid, 10.0 * f, g, alpha)
        scale_err = max(scale_err, abs(r10 - r1) / r1)

    ok = finite and change < stability_tol and scale_err < scale_tol
    return CheckResult(
        "moser_commutator_survey", ok,
        f"max ratio {big.ratio_max:.4f}, doubling change {change:.2%}, "
        f"scale invariance error {scale_err:.2e}")


def check_bkm_accumulator(ctx: CheckContext) -> CheckResult:
    quad_tol = 1e-4
    records = ctx.run_main.records
    monotone = all(b.bkm_m >= a.bkm_m for a, b in zip(records, records[1:]))
    monotone &= all(b.bkm_m >= a.bkm_m for a, b in
                    zip(ctx.run_coarse_dt.records, ctx.run_coarse_dt.records[1:]))
    m_cadence = records[-1].bkm_m
    hist = ctx.run_main.history
    m_fine = float(np.trapezoid(hist["fine_integrand"], hist["fine_times"]))
    rel = abs(m_cadence - m_fine) / m_fine
    ok = monotone and rel < quad_tol and m_cadence > 0
    return CheckResult(
        "bkm_accumulator", ok,
        f"M(1) = {m_cadence:.6f}, monotone = {monotone}, "
        f"10x re-quadrature relative difference {rel:.3e} (tol {quad_tol:.0e})")


def run_check_suite(n: int = 32, workdir: str | None = None):
    """Criteria 1-5 and 8-9 on built-in cases; returns (results, context)."""
    ctx = build_context(n=n, workdir=workdir)
    results = [
        check_spectral_correctness(n),
        check_energy_conservation(ctx),
        check_divergence_propagation(ctx),
        check_curl_advection_identity(n),
        check_formulation_consistency(ctx),
        check_moser_survey(ctx),
        check_bkm_accumulator(ctx),
    ]
    return results, ctx
