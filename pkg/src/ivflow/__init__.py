"""Pseudo-spectral solver for ideal viscoelastic flow on the periodic box,
with runtime diagnostics for the curl-based blowup criterion."""

from .config import ConfigError, RunConfig, parse_config
from .curl_system import CurlState, bilinear_a, commutator, curl_state_from, moser_ratio_survey
from .diagnostics import (DiagnosticsRecord, bkm_accumulate, gronwall_y,
                          kato_check, kato_survey)
from .driver import resume, run
from .dynamics import (StepControl, choose_dt, recover_pressure, rhs_velocity,
                       rhs_deformation_column, step_rk4, step_rk4_coupled)
from .fields import (InitialCondition, State, determinant_field, l2_norm,
                     make_initial, sobolev_norm, sup_norm, total_energy)
from .io_utils import read_checkpoint, write_checkpoint, write_diagnostics
from .spectral import (Grid, curl, dealias, divergence, forward_transform,
                       gradient, inverse_transform, leray_project, solve_poisson)

__version__ = "0.1.0"
