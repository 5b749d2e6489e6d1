"""Time integration of the fidelity-forced Cahn-Hilliard system.

State system on the rectangle with homogeneous Neumann conditions:

    d/dt phi - Lap(mu) = lam(x) (f - phi)
    mu = -eps * Lap(phi) + (1/eps) * F'(phi)

One step is linearly implicit and stabilized: the biharmonic part and a
stabilization term (S/eps)(phi^{n+1} - phi^n) are treated implicitly,
F' explicitly at the old state, and the fidelity term semi-implicitly,

    (phi^{n+1} - phi^n)/dt
        = Lap(-eps Lap phi^{n+1} + (S/eps)(phi^{n+1} - phi^n)
          + (1/eps) F'(phi^n)) + lam (f - phi^{n+1}),

with the spatially varying lam*phi^{n+1} coupling resolved by Picard
sweeps over diagonal cosine-space solves (see ``_stepping``).
Constants are exact fixed points, mass obeys the discrete balance
d(mean phi)/dt = mean(lam (f - phi^{n+1})) to Picard tolerance, and for
lam = 0 the scheme is energy-decreasing once S >= max|F''|/2 over the
range the trajectory visits.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import spectral
from ._stepping import ImplicitStepOperator, dct2, idct2
from .errors import NonFiniteError, TrajectoryMismatchError, ValidationError
from .potential import PotentialParams
from .spectral import Field, Grid

__all__ = [
    "FidelityField",
    "SolverConfig",
    "StepDiagnostics",
    "Trajectory",
    "default_stabilization",
    "resolve_stabilization",
    "step",
    "solve",
    "energy",
    "mass_balance_residual",
]


@dataclass(frozen=True)
class FidelityField:
    """Spatially varying fidelity coefficient with its damage mask.

    ``lam`` vanishes on the damaged region (mask_d == 1) and lies in
    [lambda_min, lambda_max] elsewhere.
    """

    lam: Field
    mask_d: Field
    lambda_min: float
    lambda_max: float

    def __post_init__(self) -> None:
        if self.lam.grid != self.mask_d.grid:
            raise ValidationError("fidelity coefficient and mask live on different grids")
        mv = self.mask_d.values
        if not np.all((mv == 0.0) | (mv == 1.0)):
            raise ValidationError("damage mask must contain only 0 and 1")
        if not (0.0 < self.lambda_min < self.lambda_max):
            raise ValidationError(
                f"need 0 < lambda_min < lambda_max, got [{self.lambda_min}, {self.lambda_max}]"
            )
        lv = self.lam.values
        if np.any(lv[mv == 1.0] != 0.0):
            raise ValidationError("fidelity coefficient must vanish on the damaged region")
        off = lv[mv == 0.0]
        if off.size and (off.min() < self.lambda_min or off.max() > self.lambda_max):
            raise ValidationError(
                "fidelity coefficient leaves the admissible box "
                f"[{self.lambda_min}, {self.lambda_max}]"
            )

    @classmethod
    def from_control(
        cls,
        lambda0: "Field | float",
        mask_d: Field,
        lambda_min: float,
        lambda_max: float,
    ) -> "FidelityField":
        """Extend a control given off the damaged region by zero on it.

        Scalar controls are broadcast; values are clipped into the box
        before the zero extension.
        """
        grid = mask_d.grid
        if isinstance(lambda0, Field):
            vals = lambda0.values
        else:
            vals = np.full(grid.size, float(lambda0))
        vals = np.clip(vals, lambda_min, lambda_max)
        vals = vals * (1.0 - mask_d.values)
        return cls(Field(grid, vals), mask_d, lambda_min, lambda_max)

    @property
    def grid(self) -> Grid:
        return self.lam.grid

    def chi_omega_minus_d(self) -> Field:
        """Indicator of the undamaged region."""
        return Field(self.grid, 1.0 - self.mask_d.values)


@dataclass(frozen=True)
class SolverConfig:
    """Time discretization parameters.

    ``stabilization`` may be None, in which case it is recomputed from
    the potential as eps * max F'' over the clamp range / 2 (a huge,
    very conservative value for tiny delta_clip; production runs set it
    explicitly from the range the state actually visits).
    """

    dt: float
    n_steps: int
    stabilization: float | None = None
    picard_tol: float = 1e-10
    picard_max: int = 50

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise ValidationError(f"n_steps must be nonnegative, got {self.n_steps}")
        if self.stabilization is not None and self.stabilization < 0.0:
            raise ValidationError("stabilization must be nonnegative")
        if self.picard_tol <= 0.0 or self.picard_max < 1:
            raise ValidationError("picard_tol must be positive and picard_max >= 1")

    @property
    def t_final(self) -> float:
        return self.dt * self.n_steps


def default_stabilization(params: PotentialParams) -> float:
    """eps * max F'' over the clamp range / 2 (attained at the clamp bound)."""
    return 0.5 * params.eps * float(params.F2d(params.clamp_bound))


def resolve_stabilization(cfg: SolverConfig, params: PotentialParams) -> float:
    return cfg.stabilization if cfg.stabilization is not None else default_stabilization(params)


@dataclass(frozen=True)
class StepDiagnostics:
    step: int
    time: float
    energy: float
    mass: float
    min_phi: float
    max_phi: float
    clamp_events: int
    picard_sweeps: int = 0


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed states phi^0..phi^N on a uniform step.

    Chemical potentials and per-step diagnostics are carried along when
    the producing solver recorded them.
    """

    grid: Grid
    dt: float
    times: np.ndarray = field(repr=False)
    states: tuple[Field, ...] = field(repr=False)
    mus: tuple[Field, ...] | None = field(default=None, repr=False)
    diagnostics: tuple[StepDiagnostics, ...] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", t)
        if len(self.states) != t.size:
            raise ValidationError("one state per time node required")
        if t.size >= 2:
            d = np.diff(t)
            if d.min() <= 0.0:
                raise ValidationError("times must be strictly increasing")
            if np.max(np.abs(d - self.dt)) > 1e-14 * max(1.0, abs(float(t[-1]))):
                raise ValidationError("time nodes are not uniform")

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1

    def state_matrix(self, n: int) -> np.ndarray:
        return self.states[n].values.reshape(self.grid.shape)


def _uniform_times(dt: float, n_steps: int) -> np.ndarray:
    return np.arange(n_steps + 1, dtype=np.float64) * dt


def _build_operator(grid: Grid, lam: FidelityField, cfg: SolverConfig, params) -> ImplicitStepOperator:
    return ImplicitStepOperator(
        grid,
        cfg.dt,
        params.eps,
        resolve_stabilization(cfg, params),
        lam.lam.values.reshape(grid.shape),
        cfg.picard_tol,
        cfg.picard_max,
    )


def _forward_rhs(op: ImplicitStepOperator, phi2d: np.ndarray, fprime2d: np.ndarray, lamf2d: np.ndarray) -> np.ndarray:
    """rhs = (I + dt (S/eps) L0) phi^n - dt (1/eps) L0 F'(phi^n) + dt lam f."""
    c = dct2(phi2d)
    cf = dct2(fprime2d)
    rhs_hat = op.exp_diag * c - (op.dt / op.eps) * op.mu * cf
    return idct2(rhs_hat) + op.dt * lamf2d


def step(
    phi_n: Field,
    lam: FidelityField,
    f: Field,
    cfg: SolverConfig,
    params: PotentialParams,
) -> tuple[Field, Field]:
    """Advance one time level; returns (phi^{n+1}, mu^{n+1})."""
    grid = phi_n.grid
    _check_inputs(grid, lam, f)
    op = _build_operator(grid, lam, cfg, params)
    phi2d = phi_n.values.reshape(grid.shape)
    new2d, _, _ = _advance(op, phi2d, lam, f, params)
    mu2d = _chemical_potential(op, new2d, params)
    return Field.from_matrix(grid, new2d), Field.from_matrix(grid, mu2d)


def _advance(
    op: ImplicitStepOperator,
    phi2d: np.ndarray,
    lam: FidelityField,
    f: Field,
    params,
) -> tuple[np.ndarray, int, int]:
    """One step on raw arrays; returns (phi_new, clamp events, sweeps)."""
    grid = lam.grid
    n_out = int(np.count_nonzero(np.abs(phi2d) > params.clamp_bound))
    phic = params.clamp(phi2d)
    fprime = np.asarray(params.F1d(phic))
    lamf = op.lam2d * f.values.reshape(grid.shape)
    rhs = _forward_rhs(op, phi2d, fprime, lamf)
    new2d, sweeps = op.solve(rhs, warm2d=phi2d)
    if not np.all(np.isfinite(new2d)):
        raise NonFiniteError("non-finite state after time step")
    return new2d, n_out, sweeps


def _chemical_potential(op: ImplicitStepOperator, phi2d: np.ndarray, params) -> np.ndarray:
    phic = params.clamp(phi2d, count=False)
    return op.eps * op.apply_l0(phi2d) + np.asarray(params.F1d(phic)) / params.eps


def solve(
    phi0: Field,
    lam: FidelityField,
    f: Field,
    cfg: SolverConfig,
    params: PotentialParams,
    store_mu: bool = True,
) -> Trajectory:
    """Integrate the state system, recording per-step diagnostics.

    Requires ``max|phi0| <= 1`` and ``|mean(phi0)| < 1``.
    """
    grid = phi0.grid
    _check_inputs(grid, lam, f)
    if float(np.max(np.abs(phi0.values))) > 1.0:
        raise ValidationError("initial state must satisfy max|phi0| <= 1")
    if abs(spectral.mean(phi0)) >= 1.0:
        raise ValidationError("initial state must have |mean| < 1")

    op = _build_operator(grid, lam, cfg, params)
    states = [phi0]
    mus: list[Field] = []
    diags: list[StepDiagnostics] = []

    phi2d = phi0.values.reshape(grid.shape)
    if store_mu:
        mus.append(Field.from_matrix(grid, _chemical_potential(op, phi2d, params)))
    diags.append(_diag_row(0, 0.0, phi2d, 0, 0, op, params))

    for n in range(cfg.n_steps):
        phi2d, n_clamp, sweeps = _advance(op, phi2d, lam, f, params)
        states.append(Field.from_matrix(grid, phi2d))
        if store_mu:
            mus.append(Field.from_matrix(grid, _chemical_potential(op, phi2d, params)))
        diags.append(_diag_row(n + 1, (n + 1) * cfg.dt, phi2d, n_clamp, sweeps, op, params))

    return Trajectory(
        grid=grid,
        dt=cfg.dt,
        times=_uniform_times(cfg.dt, cfg.n_steps),
        states=tuple(states),
        mus=tuple(mus) if store_mu else None,
        diagnostics=tuple(diags),
    )


def _diag_row(n, t, phi2d, n_clamp, sweeps, op, params) -> StepDiagnostics:
    return StepDiagnostics(
        step=n,
        time=float(t),
        energy=_energy_raw(phi2d, op.mu, op.grid, params),
        mass=float(phi2d.mean()) * op.grid.area,
        min_phi=float(phi2d.min()),
        max_phi=float(phi2d.max()),
        clamp_events=int(n_clamp),
        picard_sweeps=int(sweeps),
    )


def _check_inputs(grid: Grid, lam: FidelityField, f: Field) -> None:
    if lam.grid != grid or f.grid != grid:
        raise TrajectoryMismatchError("state, fidelity and image grids must agree")


def _energy_raw(phi2d: np.ndarray, mu_sym: np.ndarray, grid: Grid, params) -> float:
    c = dct2(phi2d)
    grad_sq = float(np.sum(mu_sym * c * c)) * grid.cell_area
    phic = params.clamp(phi2d, count=False)
    bulk = float(np.sum(np.asarray(params.F(phic)))) * grid.cell_area
    return 0.5 * params.eps * grad_sq + bulk / params.eps


def energy(phi: Field, params: PotentialParams) -> float:
    """Phase-field energy (eps/2)||grad phi||^2 + (1/eps) int F(phi).

    The gradient part is evaluated spectrally through the eigenvalue
    weights of -Laplacian (Parseval).
    """
    return _energy_raw(phi.values.reshape(phi.grid.shape), phi.grid.laplace_symbol(), phi.grid, params)


def mass_balance_residual(traj: Trajectory, lam: FidelityField, f: Field) -> float:
    """Max over steps of |d(mean phi)/dt - mean(lam (f - phi^{n+1}))|."""
    if traj.n_steps < 1:
        raise ValidationError("mass balance needs at least two states")
    lam_v = lam.lam.values
    f_v = f.values
    worst = 0.0
    for n in range(traj.n_steps):
        a = traj.states[n].values
        b = traj.states[n + 1].values
        drift = (b.mean() - a.mean()) / traj.dt
        forcing = (lam_v * (f_v - b)).mean()
        worst = max(worst, abs(float(drift - forcing)))
    return worst
