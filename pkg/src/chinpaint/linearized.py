"""Directional derivatives of the control-to-state map.

Solves the linearization of the *discrete* forward scheme around a
stored trajectory phi^0..phi^N: with xi^0 = 0,

    M xi^{n+1} = (I + dt (S/eps) L0) xi^n
                 - dt (1/eps) L0 (F''(phi^n) xi^n)
                 + dt g1^{n+1} - dt L0 g2^n,

where M is the same implicit operator as the forward step and, for a
control perturbation h supported off the damaged region,
g1^{n+1} = h (f - phi^{n+1}) and g2 = 0.  Linearizing the discrete map
itself (including the stabilization term and the clamp, whose
derivative is an indicator) makes the Taylor-remainder test quadratic
down to solver tolerance and the discrete adjoint an exact transpose.

Source indexing: stepping n -> n+1 consumes g1 at node n+1 and g2 at
node n; g1[0] and g2[N] are never read.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._stepping import dct2, idct2
from .errors import TrajectoryMismatchError, ValidationError
from .forward import (
    FidelityField,
    SolverConfig,
    Trajectory,
    _build_operator,
    _uniform_times,
    solve,
)
from .spectral import Field

__all__ = [
    "LinearizedSources",
    "TaylorReport",
    "solve_linearized",
    "solve_linear_general",
    "linearized_eta",
    "taylor_remainder_order",
]


@dataclass(frozen=True)
class LinearizedSources:
    """Node-indexed sources (g1, g2) for the general linear system.

    Each entry is a sequence of n_steps+1 fields or None for zero.
    """

    g1: Sequence[Field] | None = None
    g2: Sequence[Field] | None = None


def _check_trajectory(traj: Trajectory, lam: FidelityField, cfg: SolverConfig) -> None:
    if traj.grid != lam.grid:
        raise TrajectoryMismatchError("trajectory and fidelity grids differ")
    if traj.n_steps != cfg.n_steps:
        raise TrajectoryMismatchError(
            f"trajectory has {traj.n_steps} steps, config expects {cfg.n_steps}"
        )
    if abs(traj.dt - cfg.dt) > 1e-14 * max(1.0, cfg.dt):
        raise TrajectoryMismatchError("trajectory and config time steps differ")


def _sources_matrix(seq: Sequence[Field] | None, n: int, grid) -> Callable[[int], np.ndarray | None]:
    if seq is None:
        return lambda m: None
    if len(seq) != n + 1:
        raise ValidationError(f"sources must provide {n + 1} nodes, got {len(seq)}")
    for s in seq:
        if s.grid != grid:
            raise TrajectoryMismatchError("source field grid differs from trajectory grid")
    return lambda m: seq[m].values.reshape(grid.shape)


def _masked_direction(h: Field, lam: FidelityField) -> np.ndarray:
    """Zero-extension of a control direction onto the damaged region."""
    if h.grid != lam.grid:
        raise TrajectoryMismatchError("direction and fidelity grids differ")
    return (h.values * (1.0 - lam.mask_d.values)).reshape(lam.grid.shape)


def solve_linear_general(
    traj_bar: Trajectory,
    lambda_bar: FidelityField,
    sources: LinearizedSources,
    cfg: SolverConfig,
    params,
) -> Trajectory:
    """March the general linear system with sources (g1, g2), xi(0) = 0."""
    _check_trajectory(traj_bar, lambda_bar, cfg)
    grid = traj_bar.grid
    op = _build_operator(grid, lambda_bar, cfg, params)
    g1_at = _sources_matrix(sources.g1, cfg.n_steps, grid)
    g2_at = _sources_matrix(sources.g2, cfg.n_steps, grid)

    xi2d = np.zeros(grid.shape)
    states = [Field.zeros(grid)]
    for n in range(cfg.n_steps):
        phi_n = traj_bar.state_matrix(n)
        f2 = np.asarray(params.F2d(params.clamp(phi_n, count=False)))
        f2 = f2 * params.inside_clamp(phi_n)
        rhs_hat = op.exp_diag * dct2(xi2d) - (op.dt / op.eps) * op.mu * dct2(f2 * xi2d)
        g2n = g2_at(n)
        if g2n is not None:
            rhs_hat -= op.dt * op.mu * dct2(g2n)
        rhs = idct2(rhs_hat)
        g1n = g1_at(n + 1)
        if g1n is not None:
            rhs = rhs + op.dt * g1n
        xi2d, _ = op.solve(rhs, warm2d=xi2d)
        states.append(Field.from_matrix(grid, xi2d))

    return Trajectory(
        grid=grid,
        dt=cfg.dt,
        times=_uniform_times(cfg.dt, cfg.n_steps),
        states=tuple(states),
    )


def solve_linearized(
    traj_bar: Trajectory,
    lambda_bar: FidelityField,
    h: Field,
    f: Field,
    cfg: SolverConfig,
    params,
) -> Trajectory:
    """Directional state derivative for a control perturbation h.

    Specializes the general system with g1^n = h (f - phi^n), g2 = 0;
    h is extended by zero onto the damaged region first.
    """
    _check_trajectory(traj_bar, lambda_bar, cfg)
    grid = traj_bar.grid
    h2d = _masked_direction(h, lambda_bar)
    f2d = f.values.reshape(grid.shape)
    g1 = [
        Field.from_matrix(grid, h2d * (f2d - traj_bar.state_matrix(n)))
        for n in range(cfg.n_steps + 1)
    ]
    return solve_linear_general(traj_bar, lambda_bar, LinearizedSources(g1=g1), cfg, params)


def linearized_eta(traj_bar: Trajectory, xi: Trajectory, n: int, params) -> Field:
    """Reconstruct the linearized chemical potential at node n:
    eta = eps L0 xi + (1/eps) F''(phi_bar) xi (clamp-aware)."""
    grid = traj_bar.grid
    phi_n = traj_bar.state_matrix(n)
    xi_n = xi.state_matrix(n)
    f2 = np.asarray(params.F2d(params.clamp(phi_n, count=False))) * params.inside_clamp(phi_n)
    mu_sym = grid.laplace_symbol()
    eta2d = params.eps * idct2(mu_sym * dct2(xi_n)) + f2 * xi_n / params.eps
    return Field.from_matrix(grid, eta2d)


@dataclass(frozen=True)
class TaylorReport:
    """Remainder ladder for the first-order expansion of the state map."""

    taus: tuple[float, ...]
    remainders: tuple[float, ...]
    observed_order: float | None
    exact: bool


def taylor_remainder_order(
    phi0: Field,
    f: Field,
    lambda0: FidelityField,
    h: Field,
    taus: Sequence[float],
    cfg: SolverConfig,
    params,
) -> TaylorReport:
    """Least-squares slope of log remainder vs log tau.

    For each tau the remainder is
    max_n || phi_tau^n - phi^n - tau xi^n ||_{L2}
    with phi_tau the state for the control lambda0 + tau h.  Every
    perturbed control must stay inside the admissible box, otherwise a
    validation error is raised.  When all remainders fall below 1e-10
    the expansion is reported as exact and no slope is fitted.
    """
    taus = tuple(float(t) for t in taus)
    grid = phi0.grid
    h2d_flat = _masked_direction(h, lambda0).reshape(-1)

    base = solve(phi0, lambda0, f, cfg, params, store_mu=False)
    xi = solve_linearized(base, lambda0, h, f, cfg, params)

    remainders = []
    for tau in taus:
        lam_pert = FidelityField(
            Field(grid, lambda0.lam.values + tau * h2d_flat),
            lambda0.mask_d,
            lambda0.lambda_min,
            lambda0.lambda_max,
        )
        pert = solve(phi0, lam_pert, f, cfg, params, store_mu=False)
        worst = 0.0
        for n in range(cfg.n_steps + 1):
            resid = pert.states[n].values - base.states[n].values - tau * xi.states[n].values
            worst = max(worst, float(np.linalg.norm(resid)) * np.sqrt(grid.cell_area))
        remainders.append(worst)

    remainders = tuple(remainders)
    if max(remainders) <= 1e-10:
        return TaylorReport(taus, remainders, observed_order=None, exact=True)
    slope = float(np.polyfit(np.log(taus), np.log(remainders), 1)[0])
    return TaylorReport(taus, remainders, observed_order=slope, exact=False)
