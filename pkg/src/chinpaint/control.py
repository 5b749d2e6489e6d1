"""Reduced cost, gradient, Hessian form, and box-constrained descent.

The control is the fidelity amplitude on the undamaged region,
constrained to a box [lambda_min, lambda_max] and extended by zero on
the damaged set D.  The cost tracks the image misfit in time (trapezoid
quadrature), optionally at the final time, and penalizes small
amplitudes through (beta/r) * lambda^{-r}:

    J = (alpha1/2) sum_n w_n dt ||chi (phi^n - f)||^2
        + (alpha2/2) ||chi (phi^N - f)||^2
        + (beta/r) int_{off D} lambda^{-r}.

The reduced gradient pairs the costate with the fidelity residual; it
is the exact derivative of the discrete cost, so finite differences of
J reproduce it to solver tolerance:

    grad(x) = sum_{n=1}^{N} dt p^n(x) (f(x) - phi^n(x))
              - beta lambda(x)^{-(r+1)}        on Omega \\ D.

The Hessian bilinear form differentiates the gradient once more; its
curvature term is beta (r+1) lambda^{-(r+2)} (3 beta / lambda^4 for the
default exponent r = 2).  Descent is projected gradient with Armijo
backtracking; the quantity driving descent is stated so that moving
against it decreases J.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .adjoint import solve_adjoint, solve_linearized_adjoint
from .errors import Alpha2NotZeroError, LineSearchFailedError, ValidationError
from .forward import FidelityField, SolverConfig, Trajectory, solve
from .linearized import solve_linearized
from .potential import PotentialParams
from .spectral import Field, l2_inner, l2_norm

__all__ = [
    "CostWeights",
    "ControlBox",
    "OptimizerConfig",
    "OptimReport",
    "CriticalCone",
    "SecondOrderReport",
    "cost",
    "reduced_gradient",
    "hessian_apply",
    "hessian_form",
    "project_box",
    "stationarity",
    "optimize",
    "active_set_and_cone",
    "second_order_check",
]


@dataclass(frozen=True)
class CostWeights:
    """Tracking weights alpha1 (in time), alpha2 (final), penalty beta
    with exponent r (> 0, default 2)."""

    alpha1: float
    alpha2: float
    beta: float
    r: float = 2.0

    def __post_init__(self) -> None:
        if self.alpha1 < 0 or self.alpha2 < 0 or self.beta < 0:
            raise ValidationError("cost weights must be nonnegative")
        if self.alpha1 == 0 and self.alpha2 == 0 and self.beta == 0:
            raise ValidationError("at least one of alpha1, alpha2, beta must be positive")
        if self.r <= 0:
            raise ValidationError(f"penalty exponent must be positive, got {self.r}")


@dataclass(frozen=True)
class ControlBox:
    """Admissible box for the control plus the damage mask."""

    lambda_min: float
    lambda_max: float
    mask_d: Field

    def __post_init__(self) -> None:
        if not (0.0 < self.lambda_min < self.lambda_max):
            raise ValidationError(
                f"need 0 < lambda_min < lambda_max, got [{self.lambda_min}, {self.lambda_max}]"
            )
        mv = self.mask_d.values
        if not np.all((mv == 0.0) | (mv == 1.0)):
            raise ValidationError("damage mask must contain only 0 and 1")


def _trapezoid_weights(n_steps: int) -> np.ndarray:
    w = np.ones(n_steps + 1)
    if n_steps >= 1:
        w[0] = 0.5
        w[-1] = 0.5
    return w


def cost(traj: Trajectory, lambda0: FidelityField, f: Field, weights: CostWeights) -> float:
    """Evaluate the cost functional on a stored trajectory."""
    if traj.grid != lambda0.grid or f.grid != traj.grid:
        raise ValidationError("trajectory, control and image grids must agree")
    chi = 1.0 - lambda0.mask_d.values
    fv = f.values
    area = traj.grid.cell_area
    w = _trapezoid_weights(traj.n_steps)

    j = 0.0
    if weights.alpha1 != 0.0:
        track = 0.0
        for n, state in enumerate(traj.states):
            misfit = chi * (state.values - fv)
            track += w[n] * float(misfit @ misfit)
        j += 0.5 * weights.alpha1 * traj.dt * track * area
    if weights.alpha2 != 0.0:
        misfit = chi * (traj.states[-1].values - fv)
        j += 0.5 * weights.alpha2 * float(misfit @ misfit) * area
    if weights.beta != 0.0:
        off = lambda0.lam.values[chi == 1.0]
        j += (weights.beta / weights.r) * float(np.sum(off ** (-weights.r))) * area
    return j


def reduced_gradient(
    traj: Trajectory,
    adj: Trajectory,
    lambda0: FidelityField,
    f: Field,
    weights: CostWeights,
) -> Field:
    """Gradient density of the reduced cost on the undamaged region.

    Node 0 never contributes (the sensitivity vanishes there), so the
    time pairing runs over nodes 1..N with plain weight dt; the cost's
    trapezoid weights already live inside the costate sources.
    """
    if traj.n_steps != adj.n_steps or traj.grid != adj.grid:
        raise ValidationError("state and costate trajectories do not match")
    grid = traj.grid
    fv = f.values
    acc = np.zeros(grid.size)
    for n in range(1, traj.n_steps + 1):
        acc += adj.states[n].values * (fv - traj.states[n].values)
    acc *= traj.dt
    if weights.beta != 0.0:
        lam = lambda0.lam.values
        off = lambda0.mask_d.values == 0.0
        pen = np.zeros(grid.size)
        pen[off] = weights.beta * lam[off] ** (-(weights.r + 1.0))
        acc -= pen
    acc *= 1.0 - lambda0.mask_d.values
    return Field(grid, acc)


def hessian_apply(
    traj: Trajectory,
    adj: Trajectory,
    lambda0: FidelityField,
    f: Field,
    weights: CostWeights,
    k0: Field,
    cfg: SolverConfig,
    params: PotentialParams,
) -> Field:
    """Riesz density of the Hessian applied to a direction k0.

    Runs one sensitivity solve and one linearized-costate solve, then
    assembles

        sum_n dt [P^n (f - phi^n) - p^n xi^n]
        + beta (r+1) lambda^{-(r+2)} k0        on Omega \\ D.

    Requires alpha2 = 0.
    """
    if weights.alpha2 != 0.0:
        raise Alpha2NotZeroError("second-order paths require alpha2 = 0")
    grid = traj.grid
    xi = solve_linearized(traj, lambda0, k0, f, cfg, params)
    big_p = solve_linearized_adjoint(traj, adj, xi, lambda0, k0, weights, cfg, params)

    fv = f.values
    acc = np.zeros(grid.size)
    for n in range(1, traj.n_steps + 1):
        acc += big_p.states[n].values * (fv - traj.states[n].values)
        acc -= adj.states[n].values * xi.states[n].values
    acc *= traj.dt
    off = lambda0.mask_d.values == 0.0
    if weights.beta != 0.0:
        lam = lambda0.lam.values
        curv = np.zeros(grid.size)
        curv[off] = weights.beta * (weights.r + 1.0) * lam[off] ** (-(weights.r + 2.0))
        acc += curv * k0.values
    acc *= off.astype(np.float64)
    return Field(grid, acc)


def hessian_form(
    traj: Trajectory,
    adj: Trajectory,
    lambda0: FidelityField,
    f: Field,
    weights: CostWeights,
    h0: Field,
    k0: Field,
    cfg: SolverConfig,
    params: PotentialParams,
) -> float:
    """Second derivative of the reduced cost, D2J[h0, k0]."""
    return l2_inner(hessian_apply(traj, adj, lambda0, f, weights, k0, cfg, params), h0)


def project_box(lambda0: Field, box: ControlBox) -> Field:
    """Pointwise clamp into the box off D, exact zero on D."""
    vals = np.clip(lambda0.values, box.lambda_min, box.lambda_max)
    vals = vals * (1.0 - box.mask_d.values)
    return Field(lambda0.grid, vals)


def stationarity(lambda0: Field, g: Field, box: ControlBox, s0: float = 1.0) -> float:
    """Projected-step residual ||lambda - P(lambda - s0 g)||_{L2} / s0.

    Zero exactly when the discrete variational inequality holds at
    lambda0: interior cells need g = 0 there, bound cells need the
    correct gradient sign.
    """
    if s0 <= 0.0:
        raise ValidationError("stationarity step s0 must be positive")
    trial = project_box(Field(lambda0.grid, lambda0.values - s0 * g.values), box)
    return l2_norm(lambda0 - trial) / s0


@dataclass(frozen=True)
class OptimizerConfig:
    """Projected-gradient settings.

    ``step0 = None`` auto-scales the first trial step to a tenth of the
    box width against the sup-norm of the initial gradient.
    """

    max_iters: int = 100
    tol: float = 1e-6
    step0: float | None = None
    armijo_c: float = 1e-4
    max_backtracks: int = 40
    step_growth: float = 2.0
    s0_stationarity: float = 1.0


@dataclass(frozen=True)
class OptimIterate:
    iteration: int
    j: float
    stationarity: float
    step_size: float
    backtracks: int
    min_lambda: float
    max_lambda: float


@dataclass(frozen=True)
class OptimReport:
    """Per-iterate history of a projected-gradient run."""

    iterates: tuple[OptimIterate, ...]
    converged: bool
    stalled: bool
    wall_time: float

    @property
    def iterations(self) -> int:
        return len(self.iterates) - 1

    @property
    def j_history(self) -> tuple[float, ...]:
        return tuple(r.j for r in self.iterates)

    @property
    def stationarity_history(self) -> tuple[float, ...]:
        return tuple(r.stationarity for r in self.iterates)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("iter,J,stationarity,step_size,armijo_backtracks,min_lambda,max_lambda\n")
            for r in self.iterates:
                fh.write(
                    f"{r.iteration},{r.j!r},{r.stationarity!r},{r.step_size!r},"
                    f"{r.backtracks},{r.min_lambda!r},{r.max_lambda!r}\n"
                )


def _off_d_range(lam_vals: np.ndarray, mask_vals: np.ndarray) -> tuple[float, float]:
    off = lam_vals[mask_vals == 0.0]
    if off.size == 0:
        return 0.0, 0.0
    return float(off.min()), float(off.max())


def optimize(
    phi0: Field,
    f: Field,
    box: ControlBox,
    weights: CostWeights,
    cfg: SolverConfig,
    params: PotentialParams,
    opt_cfg: OptimizerConfig = OptimizerConfig(),
    lambda_init: "Field | float | None" = None,
) -> tuple[FidelityField, OptimReport]:
    """Projected gradient descent over the admissible box.

    Each iterate needs one forward and one costate solve plus the line
    search forwards; accepted J values are nonincreasing by the Armijo
    rule (sufficient decrease 1e-4, halving).  Terminates when the
    projected-step stationarity drops below ``opt_cfg.tol`` or the
    iteration cap is hit; a gradient already stationary at the initial
    control returns immediately with zero iterations.
    """
    t0 = time.perf_counter()
    grid = phi0.grid
    if lambda_init is None:
        lambda_init = 0.5 * (box.lambda_min + box.lambda_max)
    if isinstance(lambda_init, Field):
        lam_field = project_box(lambda_init, box)
    else:
        lam_field = project_box(Field.full(grid, float(lambda_init)), box)

    def as_fidelity(lf: Field) -> FidelityField:
        return FidelityField(lf, box.mask_d, box.lambda_min, box.lambda_max)

    lamff = as_fidelity(lam_field)
    traj = solve(phi0, lamff, f, cfg, params, store_mu=False)
    j = cost(traj, lamff, f, weights)
    adj = solve_adjoint(traj, lamff, f, weights, cfg, params)
    g = reduced_gradient(traj, adj, lamff, f, weights)
    stat = stationarity(lam_field, g, box, opt_cfg.s0_stationarity)

    lo, hi = _off_d_range(lam_field.values, box.mask_d.values)
    rows = [OptimIterate(0, j, stat, 0.0, 0, lo, hi)]

    if opt_cfg.step0 is not None:
        s = opt_cfg.step0
    else:
        gmax = float(np.max(np.abs(g.values)))
        s = 0.1 * (box.lambda_max - box.lambda_min) / gmax if gmax > 0 else 1.0

    stalled = False
    it = 0
    while stat > opt_cfg.tol and it < opt_cfg.max_iters:
        backtracks = 0
        while True:
            trial = project_box(Field(grid, lam_field.values - s * g.values), box)
            moved = l2_norm(trial - lam_field)
            if moved == 0.0:
                stalled = True
                break
            trial_ff = as_fidelity(trial)
            traj_t = solve(phi0, trial_ff, f, cfg, params, store_mu=False)
            j_t = cost(traj_t, trial_ff, f, weights)
            decrease = l2_inner(g, trial - lam_field)  # <= 0 on a projected step
            if j_t <= j + opt_cfg.armijo_c * decrease:
                break
            s *= 0.5
            backtracks += 1
            if backtracks > opt_cfg.max_backtracks:
                raise LineSearchFailedError(
                    f"no sufficient decrease after {opt_cfg.max_backtracks} halvings"
                )
        if stalled:
            break
        lam_field, lamff, traj, j = trial, trial_ff, traj_t, j_t
        adj = solve_adjoint(traj, lamff, f, weights, cfg, params)
        g = reduced_gradient(traj, adj, lamff, f, weights)
        stat = stationarity(lam_field, g, box, opt_cfg.s0_stationarity)
        it += 1
        lo, hi = _off_d_range(lam_field.values, box.mask_d.values)
        rows.append(OptimIterate(it, j, stat, s, backtracks, lo, hi))
        s *= opt_cfg.step_growth

    report = OptimReport(
        iterates=tuple(rows),
        converged=stat <= opt_cfg.tol,
        stalled=stalled,
        wall_time=time.perf_counter() - t0,
    )
    return lamff, report


@dataclass(frozen=True)
class CriticalCone:
    """Sign-restricted directions at a candidate control.

    Off the strongly active set, directions must be >= 0 where the
    control sits at the lower bound and <= 0 at the upper bound; on the
    strongly active set they vanish.  Membership uses the exact bound
    values produced by the arithmetic clamp.
    """

    a0_mask: Field
    at_lower: Field
    at_upper: Field
    mask_d: Field

    def project(self, h: Field) -> Field:
        v = h.values * (1.0 - self.mask_d.values) * (1.0 - self.a0_mask.values)
        lo = self.at_lower.values == 1.0
        up = self.at_upper.values == 1.0
        v = np.where(lo, np.maximum(v, 0.0), v)
        v = np.where(up, np.minimum(v, 0.0), v)
        return Field(h.grid, v)

    def contains(self, h: Field) -> bool:
        v = h.values
        if np.any(v[(self.a0_mask.values == 1.0) | (self.mask_d.values == 1.0)] != 0.0):
            return False
        if np.any(v[(self.at_lower.values == 1.0)] < 0.0):
            return False
        if np.any(v[(self.at_upper.values == 1.0)] > 0.0):
            return False
        return True


def active_set_and_cone(
    lambda0: FidelityField,
    g: Field,
    box: ControlBox,
    tol_active: float | None = None,
) -> tuple[Field, CriticalCone]:
    """Strongly active set and critical cone at a control.

    The strongly active set collects cells whose gradient density
    exceeds ``tol_active`` in magnitude (default 1e-8 times the
    gradient sup-norm; a strict "> 0" is meaningless in floating
    point).  Bound activity is detected by exact comparison against the
    box values.
    """
    grid = lambda0.grid
    gv = np.abs(g.values)
    if tol_active is None:
        tol_active = 1e-8 * float(gv.max()) if gv.max() > 0 else 0.0
    off = lambda0.mask_d.values == 0.0
    a0 = ((gv > tol_active) & off).astype(np.float64)
    lam = lambda0.lam.values
    at_lower = ((lam == box.lambda_min) & off & (a0 == 0.0)).astype(np.float64)
    at_upper = ((lam == box.lambda_max) & off & (a0 == 0.0)).astype(np.float64)
    cone = CriticalCone(
        a0_mask=Field(grid, a0),
        at_lower=Field(grid, at_lower),
        at_upper=Field(grid, at_upper),
        mask_d=lambda0.mask_d,
    )
    return Field(grid, a0), cone


@dataclass(frozen=True)
class SecondOrderReport:
    """Sampled curvatures along critical-cone directions."""

    curvatures: tuple[float, ...]
    n_requested: int
    n_skipped: int
    seed: int

    @property
    def min_curvature(self) -> float | None:
        return min(self.curvatures) if self.curvatures else None


def second_order_check(
    traj: Trajectory,
    adj: Trajectory,
    lambda0: FidelityField,
    f: Field,
    weights: CostWeights,
    box: ControlBox,
    cfg: SolverConfig,
    params: PotentialParams,
    n_dirs: int = 8,
    seed: int = 0,
    tol_active: float | None = None,
) -> SecondOrderReport:
    """Sample random directions projected into the critical cone and
    report the Hessian curvature along each.

    Directions that project to (numerically) zero are skipped and
    counted.  ``tol_active`` is forwarded to the active-set detection;
    at an optimizer output the natural choice is the stationarity
    tolerance the run converged to, since per-cell gradients below it
    are indistinguishable from zero.  Requires alpha2 = 0.
    """
    if weights.alpha2 != 0.0:
        raise Alpha2NotZeroError("second-order paths require alpha2 = 0")
    g = reduced_gradient(traj, adj, lambda0, f, weights)
    _, cone = active_set_and_cone(lambda0, g, box, tol_active=tol_active)
    rng = np.random.default_rng(seed)
    grid = traj.grid

    curvatures = []
    skipped = 0
    for _ in range(n_dirs):
        raw = Field(grid, rng.standard_normal(grid.size))
        h = cone.project(raw)
        nrm = l2_norm(h)
        if nrm < 1e-14:
            skipped += 1
            continue
        h = Field(grid, h.values / nrm)
        curvatures.append(
            hessian_form(traj, adj, lambda0, f, weights, h, h, cfg, params)
        )
    return SecondOrderReport(
        curvatures=tuple(curvatures),
        n_requested=n_dirs,
        n_skipped=skipped,
        seed=seed,
    )
