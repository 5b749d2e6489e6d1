"""Cahn-Hilliard image inpainting with a controllable fidelity coefficient.

Layers, bottom up: spectral grid operators (``spectral``), the
logarithmic double-well (``potential``), the forward solver
(``forward``), its linearization (``linearized``) and exact discrete
adjoints (``adjoint``), the reduced-cost optimization machinery
(``control``), large-fidelity decay experiments (``experiments``), and
image/CLI plumbing (``imaging``, ``config``, ``cli``).
"""

from .adjoint import (
    AdjointSources,
    costate_lipschitz_ratio,
    costate_q,
    solve_adjoint,
    solve_backward_general,
    solve_linearized_adjoint,
)
from .control import (
    ControlBox,
    CostWeights,
    OptimizerConfig,
    OptimReport,
    SecondOrderReport,
    active_set_and_cone,
    cost,
    hessian_apply,
    hessian_form,
    optimize,
    project_box,
    reduced_gradient,
    second_order_check,
    stationarity,
)
from .experiments import (
    DecayReport,
    constant_fidelity,
    decay_experiment,
    epsilon_threshold_scan,
    fit_decay_rate,
    regularized_target,
)
from .forward import (
    FidelityField,
    SolverConfig,
    Trajectory,
    default_stabilization,
    energy,
    mass_balance_residual,
    solve,
    step,
)
from .linearized import (
    LinearizedSources,
    TaylorReport,
    linearized_eta,
    solve_linear_general,
    solve_linearized,
    taylor_remainder_order,
)
from .potential import PotentialParams, SeparationReport, separation_report, well_location
from .spectral import (
    Field,
    Grid,
    SpectralField,
    from_spectral,
    hminus1_norm,
    inv_neumann_laplacian,
    l2_inner,
    l2_norm,
    laplacian,
    masked,
    mean,
    to_spectral,
)

__version__ = "0.1.0"
