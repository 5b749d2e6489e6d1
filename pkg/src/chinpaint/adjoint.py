"""Backward-in-time costate solvers.

Rather than discretizing the continuous backward system, these solvers
apply the exact transpose of the discrete forward-linearized map: the
implicit operator M is symmetric (diagonal spectral part plus a
pointwise fidelity multiplier), so its inverse serves both directions,
and the explicit part

    B^n xi = (I + dt (S/eps) L0) xi - dt (1/eps) L0 (F''(phi^n) xi)

transposes to p -> (I + dt (S/eps) L0) p - dt (1/eps) F''(phi^n) (L0 p).

The costate recursion, sources g3 per node and final datum g4, reads

    M p^N = dt w_N g3^N + g4,
    M p^m = (B^m)^T p^{m+1} + dt w_m g3^m,    m = N-1 .. 0,

with w the trapezoid weights of the cost quadrature (or 1 when raw
sources are requested).  With this pairing the space-time duality

    sum_n w_n dt <g3^n, xi^n> + <g4, xi^N>
        = sum_n dt <p^n, g1^n> - sum_n dt <L0 p^{n+1}, g2^n>

holds to Picard tolerance for arbitrary sources; it is the identity
that makes the reduced gradients trustworthy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._stepping import dct2, idct2
from .errors import Alpha2NotZeroError, TrajectoryMismatchError
from .forward import (
    FidelityField,
    SolverConfig,
    Trajectory,
    _build_operator,
    _uniform_times,
    solve,
)
from .linearized import _check_trajectory, _masked_direction, _sources_matrix
from .spectral import Field, l2_norm

__all__ = [
    "AdjointSources",
    "solve_adjoint",
    "solve_backward_general",
    "solve_linearized_adjoint",
    "costate_q",
    "costate_lipschitz_ratio",
]


@dataclass(frozen=True)
class AdjointSources:
    """Node-indexed right-hand side g3 and final datum g4 (None = zero)."""

    g3: Sequence[Field] | None = None
    g4: Field | None = None


def _quad_weights(n_steps: int, apply_quadrature: bool) -> np.ndarray:
    w = np.ones(n_steps + 1)
    if apply_quadrature and n_steps >= 1:
        w[0] = 0.5
        w[-1] = 0.5
    return w


def _lagged_curvature(params, phi_n: np.ndarray) -> np.ndarray:
    f2 = np.asarray(params.F2d(params.clamp(phi_n, count=False)))
    return f2 * params.inside_clamp(phi_n)


def solve_backward_general(
    traj_bar: Trajectory,
    lambda_bar: FidelityField,
    sources: AdjointSources,
    cfg: SolverConfig,
    params,
    apply_quadrature: bool = True,
) -> Trajectory:
    """March the transposed system backward from node N to node 0.

    With ``apply_quadrature`` (the default) g3 is weighted by the same
    trapezoid rule the cost functional uses, so feeding the tracking
    misfit reproduces :func:`solve_adjoint` bit for bit.  Raw per-node
    sources (weights all one) serve the second-order machinery.
    """
    _check_trajectory(traj_bar, lambda_bar, cfg)
    grid = traj_bar.grid
    op = _build_operator(grid, lambda_bar, cfg, params)
    n = cfg.n_steps
    g3_at = _sources_matrix(sources.g3, n, grid)
    w = _quad_weights(n, apply_quadrature)

    rhs = np.zeros(grid.shape)
    g3n = g3_at(n)
    if g3n is not None:
        rhs = rhs + cfg.dt * w[n] * g3n
    if sources.g4 is not None:
        if sources.g4.grid != grid:
            raise TrajectoryMismatchError("final datum grid differs from trajectory grid")
        rhs = rhs + sources.g4.values.reshape(grid.shape)
    p2d, _ = op.solve(rhs, warm2d=np.zeros(grid.shape))

    states = [Field.from_matrix(grid, p2d)]
    for m in range(n - 1, -1, -1):
        trans, l0p = op.transport(p2d)
        f2 = _lagged_curvature(params, traj_bar.state_matrix(m))
        rhs = trans - (op.dt / op.eps) * f2 * l0p
        g3m = g3_at(m)
        if g3m is not None:
            rhs = rhs + cfg.dt * w[m] * g3m
        p2d, _ = op.solve(rhs, warm2d=p2d)
        states.append(Field.from_matrix(grid, p2d))

    states.reverse()
    return Trajectory(
        grid=grid,
        dt=cfg.dt,
        times=_uniform_times(cfg.dt, n),
        states=tuple(states),
    )


def solve_adjoint(
    traj_bar: Trajectory,
    lambda_bar: FidelityField,
    f: Field,
    weights,
    cfg: SolverConfig,
    params,
) -> Trajectory:
    """Costate for the tracking cost.

    Sources are g3^n = alpha1 * chi * (phi^n - f) with chi the indicator
    of the undamaged region, and the final datum
    g4 = alpha2 * chi * (phi^N - f).  A nonzero alpha2 is accepted here
    (it only feeds first-order gradients); Hessian paths reject it.
    """
    _check_trajectory(traj_bar, lambda_bar, cfg)
    grid = traj_bar.grid
    chi = (1.0 - lambda_bar.mask_d.values).reshape(grid.shape)
    f2d = f.values.reshape(grid.shape)
    g3 = [
        Field.from_matrix(grid, weights.alpha1 * chi * (traj_bar.state_matrix(m) - f2d))
        for m in range(cfg.n_steps + 1)
    ]
    g4 = None
    if weights.alpha2 != 0.0:
        g4 = Field.from_matrix(
            grid, weights.alpha2 * chi * (traj_bar.state_matrix(cfg.n_steps) - f2d)
        )
    return solve_backward_general(
        traj_bar, lambda_bar, AdjointSources(g3=g3, g4=g4), cfg, params
    )


def solve_linearized_adjoint(
    traj_bar: Trajectory,
    adj_bar: Trajectory,
    xi: Trajectory,
    lambda_bar: FidelityField,
    h: Field,
    weights,
    cfg: SolverConfig,
    params,
) -> Trajectory:
    """Derivative of the costate map in the control direction h.

    Differentiating the discrete costate recursion gives the backward
    system with raw per-node sources

        g3^m = w_m alpha1 chi xi^m - h p^m
               - (1/eps) F'''(phi^m) xi^m (L0 p^{m+1})   (m < N),
        g3^N = w_N alpha1 chi xi^N - h p^N,

    and zero final datum.  Only the tracking term carries the cost
    quadrature weight; the fidelity and curvature terms come from the
    step operator itself and are unweighted.  Requires alpha2 = 0.
    """
    if weights.alpha2 != 0.0:
        raise Alpha2NotZeroError("second-order paths require alpha2 = 0")
    _check_trajectory(traj_bar, lambda_bar, cfg)
    if adj_bar.n_steps != cfg.n_steps or xi.n_steps != cfg.n_steps:
        raise TrajectoryMismatchError("costate / sensitivity trajectories do not match config")
    grid = traj_bar.grid
    n = cfg.n_steps
    chi = (1.0 - lambda_bar.mask_d.values).reshape(grid.shape)
    h2d = _masked_direction(h, lambda_bar)
    w = _quad_weights(n, apply_quadrature=True)
    mu_sym = grid.laplace_symbol()

    g3 = []
    for m in range(n + 1):
        src = w[m] * weights.alpha1 * chi * xi.state_matrix(m) - h2d * adj_bar.state_matrix(m)
        if m < n:
            phi_m = traj_bar.state_matrix(m)
            f3 = np.asarray(params.F3d(params.clamp(phi_m, count=False)))
            f3 = f3 * params.inside_clamp(phi_m)
            l0p_next = idct2(mu_sym * dct2(adj_bar.state_matrix(m + 1)))
            src = src - (f3 * xi.state_matrix(m)) * l0p_next / params.eps
        g3.append(Field.from_matrix(grid, src))

    return solve_backward_general(
        traj_bar,
        lambda_bar,
        AdjointSources(g3=g3, g4=None),
        cfg,
        params,
        apply_quadrature=False,
    )


def costate_q(p_traj: Trajectory, n: int, params) -> Field:
    """Second costate component, reconstructed as q = eps * L0 p."""
    grid = p_traj.grid
    mu_sym = grid.laplace_symbol()
    return Field.from_matrix(
        grid, params.eps * idct2(mu_sym * dct2(p_traj.state_matrix(n)))
    )


def costate_lipschitz_ratio(
    phi0: Field,
    f: Field,
    lambda1: FidelityField,
    lambda2: FidelityField,
    weights,
    cfg: SolverConfig,
    params,
) -> float:
    """max_t ||p1 - p2||_{L2} / ||lam1 - lam2||_{L2}; 0 when controls agree."""
    denom = l2_norm(lambda1.lam - lambda2.lam)
    if denom == 0.0:
        return 0.0
    p1 = solve_adjoint(solve(phi0, lambda1, f, cfg, params, store_mu=False), lambda1, f, weights, cfg, params)
    p2 = solve_adjoint(solve(phi0, lambda2, f, cfg, params, store_mu=False), lambda2, f, weights, cfg, params)
    worst = max(
        l2_norm(p1.states[m] - p2.states[m]) for m in range(cfg.n_steps + 1)
    )
    return worst / denom
