"""Scattering and incoming-trajectory construction for a string coupled to a nonlinear oscillator."""
from .errors import (
    BlowUp,
    CannotLocalize,
    ConfigError,
    Diverged,
    GridError,
    InconsistentInput,
    LambError,
    NoConvergence,
    NotHyperbolic,
    NotStationary,
    WindowError,
)
from .greenop import apply_R
from .grid import (
    AsymptoticState,
    EnergyState,
    GridFunction,
    StationaryState,
    Trajectory,
    build_S,
    energy_norm,
    validate_asymptotic_state,
)
from .incoming import (
    IncomingSolution,
    backward_continue,
    choose_T,
    construct_incoming,
    decompose_force,
    run_counterexample,
    solve_tail,
)
from .models import ForceModel, make_model
from .primitives import Primitive, asymptotic_state, energy_state
from .scattering import (
    ForwardRun,
    ScatteringData,
    extract_scattering,
    forward_solve,
    free_field,
    incoming_wave,
    reconstruct_initial,
    remainder_norm,
)
from .spectral import HyperbolicSplit, fundamental_solution, hyperbolic_split, matexp

__all__ = [name for name in dir() if not name.startswith("_")]
