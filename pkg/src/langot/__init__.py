"""Desk-scale numerics for controlled inertial diffusions with prescribed
endpoint position laws and their small-mass limit."""

__version__ = "0.1.0"

from .kernels import (
    KernelParams,
    SampledPath,
    TimeGrid,
    kernel_K,
    kernel_f,
    kernel_phi,
    kernel_phi_inverse,
    psi_operator,
)
from .measures import (
    DiscreteCoupling,
    EmpiricalMeasure,
    discrete_ot_exact,
    energy_distance,
    relative_entropy,
    wasserstein2_squared_1d,
)
from .sde import (
    SDEConfig,
    Trajectory,
    decompose,
    simulate_overdamped,
    simulate_underdamped_euler,
    simulate_underdamped_exact,
)
from .bridge import (
    SchrodingerDrift,
    SinkhornPotentials,
    TerminalReward,
    ValueControl,
    bridge_drift_m0,
    gaussian_density,
    hjb_residual_phi,
    hjb_residual_psi,
    make_reward,
    optimal_control_m,
    phi_value,
    psi_m_value,
    sinkhorn,
)
from .coupling import (
    CouplingResult,
    build_zm,
    build_zm_beta,
    eta_transform,
    momentum_bound,
    union_grid,
    warped_eval_grid,
)
from .costs import (
    CostFunction,
    action,
    check_assumptions,
    deterministic_identity_check,
    evaluate,
    mc_value,
)
from .experiments import ExperimentConfig, Verdict, emit, parse_config, run_scenario
