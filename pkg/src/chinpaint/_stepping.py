"""Shared implicit-step machinery for the forward, linearized, and
backward solvers.

Every solver in this package advances (or retreats) one time level by
solving

    M u = rhs,    M = I + dt*eps*L0^2 + dt*(S/eps)*L0 + dt*diag(lam),

where L0 = -Laplacian is diagonal in the cosine basis with symbol mu.
The spatially varying fidelity coefficient lam breaks diagonality, so M
is inverted by Picard sweeps: a constant reference value lam_ref =
(min(lam)+max(lam))/2 is kept on the diagonal and the deviation is
lagged,

    (A + dt*lam_ref) u_{k+1} = rhs + dt*(lam_ref - lam) u_k.

The iteration contracts with factor at most
dt*spread/2 / (1 + dt*spread/2) where spread = max(lam) - min(lam).
M is symmetric, so the same solve serves the transposed (adjoint) steps.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dctn, idctn

from .errors import NonFiniteError, PicardDivergedError

__all__ = ["dct2", "idct2", "ImplicitStepOperator"]


def dct2(mat: np.ndarray) -> np.ndarray:
    return dctn(mat, type=2, norm="ortho")


def idct2(mat: np.ndarray) -> np.ndarray:
    return idctn(mat, type=2, norm="ortho")


class ImplicitStepOperator:
    """Diagonal-plus-fidelity implicit operator for one time step size."""

    def __init__(
        self,
        grid,
        dt: float,
        eps: float,
        stab: float,
        lam2d: np.ndarray,
        picard_tol: float,
        picard_max: int,
    ) -> None:
        self.grid = grid
        self.dt = float(dt)
        self.eps = float(eps)
        self.stab = float(stab)
        self.lam2d = np.asarray(lam2d, dtype=np.float64)
        self.picard_tol = float(picard_tol)
        self.picard_max = int(picard_max)

        mu = grid.laplace_symbol()
        self.mu = mu
        # explicit transport symbol (1 + dt*(S/eps)*mu) shared by all solvers
        self.exp_diag = 1.0 + self.dt * (self.stab / self.eps) * mu

        lam_min = float(self.lam2d.min())
        lam_max = float(self.lam2d.max())
        self.lam_ref = 0.5 * (lam_min + lam_max)
        self.uniform_lam = lam_max == lam_min
        a_diag = 1.0 + self.dt * self.eps * mu * mu + self.dt * (self.stab / self.eps) * mu
        self.m_diag = a_diag + self.dt * self.lam_ref
        self.dlam2d = self.lam_ref - self.lam2d  # zero when uniform
        self._l2_weight = np.sqrt(grid.cell_area)

    def solve(self, rhs2d: np.ndarray, warm2d: np.ndarray) -> tuple[np.ndarray, int]:
        """Invert M against ``rhs2d``; returns (solution, picard sweeps)."""
        if self.uniform_lam:
            u = idct2(dct2(rhs2d) / self.m_diag)
            if not np.all(np.isfinite(u)):
                raise NonFiniteError("non-finite values after implicit solve")
            return u, 0
        u = warm2d
        dt = self.dt
        for sweep in range(1, self.picard_max + 1):
            u_new = idct2(dct2(rhs2d + dt * self.dlam2d * u) / self.m_diag)
            diff = float(np.linalg.norm(u_new - u)) * self._l2_weight
            u = u_new
            if not np.isfinite(diff):
                raise NonFiniteError("non-finite values during Picard iteration")
            if diff <= self.picard_tol:
                return u, sweep
        raise PicardDivergedError(
            f"Picard iteration did not reach {self.picard_tol:g} within "
            f"{self.picard_max} sweeps (last update {diff:g}); "
            "reduce dt or raise picard_max"
        )

    def transport(self, u2d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Apply the explicit symbols to one state.

        Returns ``((I + dt (S/eps) L0) u, L0 u)``; the second factor feeds
        the lagged-nonlinearity terms of each solver.
        """
        c = dct2(u2d)
        return idct2(self.exp_diag * c), idct2(self.mu * c)

    def apply_l0(self, u2d: np.ndarray) -> np.ndarray:
        """Apply L0 = -Laplacian."""
        return idct2(self.mu * dct2(u2d))
