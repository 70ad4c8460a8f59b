"""Run configuration: flat ``key = value`` files with ``#`` comments.

Keys mirror the configuration field paths (``initial.kind``, ``step.dt``,
...); unknown keys are errors, reported with their line number.
"""

from dataclasses import dataclass

from .dynamics import StepControl, TAIL_HALT_DEFAULT
from .fields import InitialCondition


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    grid_n: int
    initial: InitialCondition
    step: StepControl
    output_path: str
    output_every: int = 1
    checkpoint_every: int = 0           # 0 disables checkpoints
    tail_halt_threshold: float = TAIL_HALT_DEFAULT
    sobolev_s: int = 3

    def __post_init__(self):
        if self.grid_n < 8 or self.grid_n % 2 != 0:
            raise ConfigError(f"grid_n must be even and >= 8, got {self.grid_n}")
        if self.output_every < 1:
            raise ConfigError("output_every must be >= 1")
        if self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be >= 0")
        if self.sobolev_s < 3:
            raise ConfigError("sobolev_s must be >= 3")
        if not self.output_path:
            raise ConfigError("output_path is required")


_SCHEMA = {
    "grid_n": int,
    "initial.kind": str,
    "initial.amplitude": float,
    "initial.f_perturbation_amplitude": float,
    "initial.spectrum_exponent": float,
    "initial.seed": int,
    "initial.path": str,
    "step.mode": str,
    "step.dt": float,
    "step.cfl_number": float,
    "step.t_end": float,
    "step.max_steps": int,
    "output_every": int,
    "output_path": str,
    "checkpoint_every": int,
    "tail_halt_threshold": float,
    "sobolev_s": int,
}

_REQUIRED = ("grid_n", "initial.kind", "step.mode", "step.t_end", "output_path")


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got '{stripped}'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        try:
            raw[key] = _SCHEMA[key](value)
        except ValueError:
            raise ConfigError(
                f"{source}:{lineno}: cannot parse '{value}' as "
                f"{_SCHEMA[key].__name__} for key '{key}'") from None

    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"{source}: missing required key '{key}'")

    try:
        initial = InitialCondition(
            kind=raw["initial.kind"],
            amplitude=raw.get("initial.amplitude", 1.0),
            f_perturbation_amplitude=raw.get("initial.f_perturbation_amplitude", 0.0),
            spectrum_exponent=raw.get("initial.spectrum_exponent", -2.0),
            seed=raw.get("initial.seed", 0),
            path=raw.get("initial.path", ""),
        )
        step = StepControl(
            mode=raw["step.mode"],
            t_end=raw["step.t_end"],
            dt=raw.get("step.dt", 0.0),
            cfl_number=raw.get("step.cfl_number", 0.0),
            max_steps=raw.get("step.max_steps", 10_000_000),
        )
        return RunConfig(
            grid_n=raw["grid_n"],
            initial=initial,
            step=step,
            output_path=raw["output_path"],
            output_every=raw.get("output_every", 1),
            checkpoint_every=raw.get("checkpoint_every", 0),
            tail_halt_threshold=raw.get("tail_halt_threshold", TAIL_HALT_DEFAULT),
            sobolev_s=raw.get("sobolev_s", 3),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, source=str(path))
