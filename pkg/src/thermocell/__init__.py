"""Truncated thermal model of a lithium cell sandwich: two elliptic
potential equations coupled through an exchange-current kernel to a
parabolic heat balance, solved on cell-centered meshes with a fixed-point
outer loop and a detected breakdown time."""

from .butler_volmer import (
    ButlerVolmerContext,
    context_with_params,
    context_without_truncation,
    d_ifara_du,
    d_ifara_dy2,
    effective_temperature,
    i_fara_eps,
    i_fara_eps_two_exp,
    make_context,
    potential_gradients,
    source_Q_eps,
    theta_eps,
)
from .config import RunConfig, load_config, parse_config
from .coupled import (
    HORIZON,
    SimulationResult,
    SolverSettings,
    apply_J,
    detect_tstar,
    picard_step,
    recheck_without_truncation,
    run_simulation,
)
from .errors import (
    ConfigError,
    SolverFailure,
    StructuralError,
    ThermocellError,
    ValidationFailure,
)
from .heat import TemperatureField, linf_monitor, step_temperature
from .mesh import build_sandwich_mesh, region_measure
from .oracle import (
    brute_force_solve,
    compare_fields,
    convergence_rate,
    fd_check,
    oracle_apply_J,
    oracle_solve_limit,
    oracle_solve_regularized,
)
from .params import (
    PhysicalParams,
    epsilon_bounds,
    make_params,
    validate_hypotheses,
)
from .potentials import (
    PotentialPair,
    apriori_diagnostics,
    assemble_residual,
    constant_solution_reference,
    energy_identity_residual,
    energy_identity_terms,
    solve_limit,
    solve_regularized,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
