"""Shared fixtures and oracles for the test suite.

The canonical regression scenario is a horizontal stripe crossing a
square damaged hole on the unit square; helpers build it at any grid
size.  Frozen calibration values (computed once by the oracles in
scripts/calibrate.py and committed in frozen.json) are loaded here.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

import chinpaint as cp

_HERE = os.path.dirname(__file__)


def frozen() -> dict:
    with open(os.path.join(_HERE, "frozen.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)


@dataclass(frozen=True)
class StripeFixture:
    grid: cp.Grid
    params: cp.PotentialParams
    m_star: float
    mask_d: cp.Field          # square hole indicator
    chi: cp.Field             # complement indicator
    f: cp.Field               # binary stripe, zero-extended over the hole
    truth: cp.Field           # stripe continuation, defined everywhere
    phi0: cp.Field            # blurred initial guess
    cfg: cp.SolverConfig
    box: cp.ControlBox
    weights: cp.CostWeights

    def constant_control(self, value: float) -> cp.FidelityField:
        return cp.FidelityField.from_control(
            value, self.mask_d, self.box.lambda_min, self.box.lambda_max
        )


def stripe_fixture(
    n: int = 64,
    eps: float = 0.05,
    dt: float = 5e-5,
    n_steps: int = 400,
    picard_tol: float = 1e-12,
    stabilization: float = 8.0,
    lambda_max: float = 1e4,
    blur_sigma: float = 1.5,
) -> StripeFixture:
    from chinpaint.imaging import initial_guess

    grid = cp.Grid(n, n, 1.0, 1.0)
    params = cp.PotentialParams(theta=1.0, theta_c=2.0, eps=eps)
    m_star = cp.well_location(params)
    x, y = grid.cell_centers()
    stripe = np.where(np.abs(y - 0.5) < 0.125, m_star, -m_star)
    hole = ((x > 0.375) & (x < 0.625) & (np.abs(y - 0.5) < 0.185)).astype(float)
    mask_d = cp.Field.from_matrix(grid, hole)
    f = cp.Field.from_matrix(grid, stripe * (1.0 - hole))
    truth = cp.Field.from_matrix(grid, stripe)
    phi0 = initial_guess(f, mask_d, blur_sigma)
    cfg = cp.SolverConfig(
        dt=dt,
        n_steps=n_steps,
        stabilization=stabilization,
        picard_tol=picard_tol,
        picard_max=400,
    )
    box = cp.ControlBox(1.0, lambda_max, mask_d)
    weights = cp.CostWeights(alpha1=1.0, alpha2=0.0, beta=1e-3, r=2.0)
    return StripeFixture(
        grid=grid,
        params=params,
        m_star=m_star,
        mask_d=mask_d,
        chi=cp.Field(grid, 1.0 - mask_d.values),
        f=f,
        truth=truth,
        phi0=phi0,
        cfg=cfg,
        box=box,
        weights=weights,
    )


def smooth_random_field(grid: cp.Grid, seed: int, amplitude: float = 0.5, modes: int = 4) -> cp.Field:
    """Seeded band-limited field (cosine modes up to ``modes`` per axis)."""
    rng = np.random.default_rng(seed)
    x, y = grid.cell_centers()
    out = np.zeros(grid.shape)
    for k in range(modes + 1):
        for l in range(modes + 1):
            if k == 0 and l == 0:
                continue
            out += rng.normal() * np.cos(k * np.pi * x / grid.lx) * np.cos(l * np.pi * y / grid.ly)
    peak = np.abs(out).max()
    if peak > 0:
        out *= amplitude / peak
    return cp.Field.from_matrix(grid, out)


def random_box_control(box: cp.ControlBox, seed: int) -> cp.FidelityField:
    """Seeded uniform control in the admissible box, zero on D."""
    grid = box.mask_d.grid
    rng = np.random.default_rng(seed)
    vals = rng.uniform(box.lambda_min, box.lambda_max, grid.size)
    return cp.FidelityField.from_control(
        cp.Field(grid, vals), box.mask_d, box.lambda_min, box.lambda_max
    )


class QuadraticPotential:
    """Smooth stand-in with constant curvature; no clamping, no wells.

    Duck-typed against the solver-facing surface of PotentialParams; the
    vanishing third derivative makes certain remainder tests degenerate
    on purpose.
    """

    def __init__(self, curvature: float = 1.0, eps: float = 1.0):
        self.c = curvature
        self.eps = eps
        self.delta_clip = 1e-6
        self.clamp_bound = np.inf

    def clamp(self, s, count: bool = True):
        return np.asarray(s, dtype=np.float64)

    def inside_clamp(self, s):
        return np.ones_like(np.asarray(s, dtype=np.float64), dtype=bool)

    def F(self, s):
        s = np.asarray(s, dtype=np.float64)
        return 0.5 * self.c * s * s

    def F1d(self, s):
        return self.c * np.asarray(s, dtype=np.float64)

    def F2d(self, s):
        return self.c * np.ones_like(np.asarray(s, dtype=np.float64))

    def F3d(self, s):
        return np.zeros_like(np.asarray(s, dtype=np.float64))

    def F4d(self, s):
        return np.zeros_like(np.asarray(s, dtype=np.float64))
