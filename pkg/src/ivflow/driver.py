"""Run orchestration: step the state (with its co-evolved curl system),
emit diagnostics records, checkpoints and a key = value run summary.

Exit codes: 0 completed, 2 resolution lost, 3 non-finite fields,
4 configuration errors (raised before any stepping).
"""

import sys
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .config import RunConfig
from .curl_system import CurlState, curl_consistency_error, curl_state_from
from .diagnostics import (DiagnosticsRecord, compute_record, curl_l2_bound_check,
                          energy_bound_check)
from .dynamics import (F_DIV_WARN, NonFiniteFieldError, choose_dt, step_rk4,
                       step_rk4_coupled)
from .fields import State, make_initial, sup_norm
from .io_utils import read_checkpoint, write_checkpoint, write_diagnostics
from .spectral import Grid

_T_EPS = 1e-12

EXIT_COMPLETED = 0
EXIT_RESOLUTION_LOST = 2
EXIT_NONFINITE = 3
EXIT_CONFIG_ERROR = 4

_STATUS_CODE = {
    "completed": EXIT_COMPLETED,
    "resolution_lost": EXIT_RESOLUTION_LOST,
    "nonfinite": EXIT_NONFINITE,
}


@dataclass
class RunResult:
    status: str
    exit_code: int
    records: list
    summary: dict
    history: dict
    final_state: State
    final_curl_state: CurlState
    snapshots: dict = field(default_factory=dict)


def _bkm_integrand_from_state(state: State) -> float:
    grid = state.grid
    n = grid.n
    stack = np.concatenate([state.u, state.f.reshape(9, n, n, n)])
    xh = grid.fwd(stack).reshape(4, 3, n, n, n // 2 + 1)
    curls = grid.inv(spectral.curl_spec(grid, xh))
    return float(sum(sup_norm(curls[i]) for i in range(4)))


def _bkm_integrand_from_curlstate(cs: CurlState) -> float:
    return float(sup_norm(cs.w) + sum(sup_norm(cs.r[k]) for k in range(3)))


def run(config: RunConfig, initial_state: State | None = None,
        record_fine_integrand: bool = False, snapshot_times=(),
        couple_until: float | None = None, quiet: bool = True) -> RunResult:
    """Advance to t_end or a halt condition, writing CSV and summary files.

    ``couple_until`` limits how long the curl system is co-evolved (None
    means the whole run); the built-in check suite uses it to keep the long
    conservation run affordable.
    """
    if initial_state is not None:
        grid = initial_state.grid
        state = initial_state
    else:
        grid = Grid(config.grid_n)
        state = make_initial(config.initial, grid)
    cs = curl_state_from(state)
    coupled_pair = (state, cs)

    records: list[DiagnosticsRecord] = []
    grad_integrand: list[float] = []
    fine_times: list[float] = []
    fine_integrand: list[float] = []
    kato_ratio_f: list[tuple] = []
    snapshots = {}
    pending_snapshots = sorted(snapshot_times)

    def emit(rec, extras):
        records.append(rec)
        grad_integrand.append(extras["grad_sup_integrand"])
        kato_ratio_f.append(extras["kato_ratio_f"])

    rec, extras = compute_record(state, cs, config.sobolev_s, None)
    emit(rec, extras)
    if record_fine_integrand:
        fine_times.append(state.time)
        fine_integrand.append(rec.bkm_integrand)

    status = "completed"
    step = 0
    div_warned = False
    t_end = config.step.t_end
    try:
        while state.time < t_end - _T_EPS and step < config.step.max_steps:
            if config.step.mode == "cfl":
                dt = choose_dt(state, config.step, grid)
            else:
                dt = min(config.step.dt, t_end - state.time)

            coupling = couple_until is None or state.time < couple_until - _T_EPS
            if coupling:
                state, cs = step_rk4_coupled(state, cs, dt)
                coupled_pair = (state, cs)
            else:
                state = step_rk4(state, dt)
            step += 1

            if record_fine_integrand:
                fine_times.append(state.time)
                fine_integrand.append(_bkm_integrand_from_curlstate(cs) if coupling
                                      else _bkm_integrand_from_state(state))

            if pending_snapshots and state.time >= pending_snapshots[0] - 0.5 * dt:
                snapshots[pending_snapshots.pop(0)] = (state, cs)

            at_end = state.time >= t_end - _T_EPS
            if step % config.output_every == 0 or at_end:
                rec, extras = compute_record(state, cs, config.sobolev_s, records[-1])
                emit(rec, extras)
                if not div_warned and rec.sup_div_f > F_DIV_WARN:
                    print(f"warning: deformation divergence drift {rec.sup_div_f:.3e} "
                          f"at t={state.time:.6f}", file=sys.stderr)
                    div_warned = True
                if rec.tail_energy_fraction > config.tail_halt_threshold:
                    status = "resolution_lost"
                    break
            if config.checkpoint_every and step % config.checkpoint_every == 0:
                write_checkpoint(state, f"{config.output_path}.step{step:08d}.ckpt")
    except NonFiniteFieldError as exc:
        status = "nonfinite"
        if not quiet:
            print(f"run aborted: {exc}", file=sys.stderr)

    energy_lhs, energy_integral, energy_c = energy_bound_check(records, grad_integrand)
    curl_lhs, curl_integral, curl_c = curl_l2_bound_check(records)
    energies = np.array([r.energy for r in records])
    final_rec = records[-1]
    summary = {
        "halt_reason": status,
        "steps": step,
        "final_time": state.time,
        "bkm_m": final_rec.bkm_m,
        "gronwall_y": final_rec.gronwall_y,
        "energy_implied_c": energy_c,
        "energy_exponent_integral": energy_integral,
        "curl_implied_c": curl_c,
        "curl_exponent_integral": curl_integral,
        "energy_drift_rel": float(np.abs(energies - energies[0]).max() / energies[0])
        if energies[0] > 0 else 0.0,
        "kato_ratio_max": max(r.kato_ratio for r in records),
        "curl_consistency_error": curl_consistency_error(*coupled_pair),
        "det_min": min(r.det_min for r in records),
        "det_max": max(r.det_max for r in records),
        "tail_energy_fraction": final_rec.tail_energy_fraction,
    }

    write_diagnostics(records, config.output_path)
    _write_summary(summary, config.output_path + ".summary")

    history = {
        "grad_sup_integrand": np.asarray(grad_integrand),
        "kato_ratio_f": np.asarray(kato_ratio_f),
        "fine_times": np.asarray(fine_times),
        "fine_integrand": np.asarray(fine_integrand),
    }
    return RunResult(status, _STATUS_CODE[status], records, summary, history,
                     state, cs, snapshots)


def _write_summary(summary: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in summary.items():
            if isinstance(value, float):
                fh.write(f"{key} = {value:.17g}\n")
            else:
                fh.write(f"{key} = {value}\n")


def resume(checkpoint_path, config: RunConfig, **kwargs) -> RunResult:
    """Continue a checkpointed state to t_end; the config's initial.* is ignored.

    The blowup integral restarts at zero: checkpoints store only the state,
    so the summary describes the resumed segment.
    """
    state = read_checkpoint(checkpoint_path)
    if state.grid.n != config.grid_n:
        raise ValueError(
            f"checkpoint n={state.grid.n} does not match config grid_n={config.grid_n}")
    return run(config, initial_state=state, **kwargs)
