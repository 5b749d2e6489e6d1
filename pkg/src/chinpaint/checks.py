"""Finite-difference verification batteries for gradients and Hessians.

Shared by the CLI check commands and the test suite.  Directions are
seeded random fields supported off the damaged region and scaled so the
perturbed controls stay strictly inside the admissible box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import solve_adjoint
from .control import ControlBox, CostWeights, cost, hessian_form, reduced_gradient
from .errors import ValidationError
from .forward import FidelityField, SolverConfig, solve
from .potential import PotentialParams
from .spectral import Field, l2_inner

__all__ = ["GradCheckRow", "GradCheckReport", "HessCheckReport", "grad_check", "hess_check", "random_directions"]


def random_directions(
    box: ControlBox, n_dirs: int, seed: int, scale: float | None = None
) -> list[Field]:
    """Seeded uniform directions on [-scale, scale], zero on D.

    Default scale is 0.4 of the box width, which keeps mid-box controls
    perturbed by tau <= 1 inside the box.
    """
    grid = box.mask_d.grid
    if scale is None:
        scale = 0.4 * (box.lambda_max - box.lambda_min)
    rng = np.random.default_rng(seed)
    off = 1.0 - box.mask_d.values
    return [
        Field(grid, scale * rng.uniform(-1.0, 1.0, grid.size) * off)
        for _ in range(n_dirs)
    ]


def _perturbed(lam0: FidelityField, h: Field, t: float) -> FidelityField:
    return FidelityField(
        Field(lam0.grid, lam0.lam.values + t * h.values),
        lam0.mask_d,
        lam0.lambda_min,
        lam0.lambda_max,
    )


@dataclass(frozen=True)
class GradCheckRow:
    direction: int
    adjoint_pairing: float
    fd_value: float
    rel_error: float


@dataclass(frozen=True)
class GradCheckReport:
    rows: tuple[GradCheckRow, ...]
    tau: float
    seed: int

    @property
    def max_rel_error(self) -> float:
        return max(r.rel_error for r in self.rows)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("direction,adjoint_pairing,fd_value,rel_error\n")
            for r in self.rows:
                fh.write(f"{r.direction},{r.adjoint_pairing!r},{r.fd_value!r},{r.rel_error!r}\n")


def grad_check(
    phi0: Field,
    f: Field,
    lam0: FidelityField,
    weights: CostWeights,
    cfg: SolverConfig,
    params: PotentialParams,
    box: ControlBox,
    n_dirs: int = 5,
    tau: float = 1e-4,
    seed: int = 0,
) -> GradCheckReport:
    """Compare adjoint gradient pairings against central differences of J."""
    if n_dirs < 1:
        raise ValidationError("grad check needs at least one direction")
    traj = solve(phi0, lam0, f, cfg, params, store_mu=False)
    adj = solve_adjoint(traj, lam0, f, weights, cfg, params)
    g = reduced_gradient(traj, adj, lam0, f, weights)

    rows = []
    for i, h in enumerate(random_directions(box, n_dirs, seed)):
        pairing = l2_inner(g, h)
        lp = _perturbed(lam0, h, tau)
        lm = _perturbed(lam0, h, -tau)
        jp = cost(solve(phi0, lp, f, cfg, params, store_mu=False), lp, f, weights)
        jm = cost(solve(phi0, lm, f, cfg, params, store_mu=False), lm, f, weights)
        fd = (jp - jm) / (2.0 * tau)
        rel = abs(pairing - fd) / max(abs(fd), abs(pairing), 1e-300)
        rows.append(GradCheckRow(i, pairing, fd, rel))
    return GradCheckReport(rows=tuple(rows), tau=tau, seed=seed)


@dataclass(frozen=True)
class HessCheckReport:
    d2_hh: float
    d2_kk: float
    d2_hk: float
    d2_kh: float
    fd_second: float
    symmetry_gap: float
    symmetry_scale: float
    fd_rel_error: float
    tau: float
    seed: int

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("quantity,value\n")
            for name in (
                "d2_hh",
                "d2_kk",
                "d2_hk",
                "d2_kh",
                "fd_second",
                "symmetry_gap",
                "symmetry_scale",
                "fd_rel_error",
            ):
                fh.write(f"{name},{getattr(self, name)!r}\n")


def hess_check(
    phi0: Field,
    f: Field,
    lam0: FidelityField,
    weights: CostWeights,
    cfg: SolverConfig,
    params: PotentialParams,
    box: ControlBox,
    tau: float = 1e-3,
    seed: int = 0,
) -> HessCheckReport:
    """Symmetry and second-difference checks of the Hessian form."""
    traj = solve(phi0, lam0, f, cfg, params, store_mu=False)
    adj = solve_adjoint(traj, lam0, f, weights, cfg, params)
    h, k = random_directions(box, 2, seed)

    def form(a: Field, b: Field) -> float:
        return hessian_form(traj, adj, lam0, f, weights, a, b, cfg, params)

    d2_hh = form(h, h)
    d2_kk = form(k, k)
    d2_hk = form(h, k)
    d2_kh = form(k, h)

    j0 = cost(traj, lam0, f, weights)
    lp = _perturbed(lam0, h, tau)
    lm = _perturbed(lam0, h, -tau)
    jp = cost(solve(phi0, lp, f, cfg, params, store_mu=False), lp, f, weights)
    jm = cost(solve(phi0, lm, f, cfg, params, store_mu=False), lm, f, weights)
    fd = (jp - 2.0 * j0 + jm) / (tau * tau)

    return HessCheckReport(
        d2_hh=d2_hh,
        d2_kk=d2_kk,
        d2_hk=d2_hk,
        d2_kh=d2_kh,
        fd_second=fd,
        symmetry_gap=abs(d2_hk - d2_kh),
        symmetry_scale=abs(d2_hh) + abs(d2_kk) + 1.0,
        fd_rel_error=abs(d2_hh - fd) / max(abs(fd), abs(d2_hh), 1e-300),
        tau=tau,
        seed=seed,
    )
