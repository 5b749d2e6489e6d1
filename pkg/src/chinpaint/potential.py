"""Logarithmic double-well potential and its derivatives.

The potential is

    F(s) = (theta/2) * [(1-s) log(1-s) + (1+s) log(1+s)] - (theta_c/2) s^2

for 0 < theta < theta_c, with the convex/concave splitting
F = F0 + F1, F0 the logarithmic part and F1(s) = -(theta_c/2) s^2.
F has equal minima at +/- m_star, the positive root of F'.

Every evaluation clamps its argument to [-1 + delta_clip, 1 - delta_clip]
and tallies how many samples were actually out of range, so overshoots
of a discrete scheme are observable instead of fatal.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import NoRootError
from .spectral import Field

__all__ = [
    "PotentialParams",
    "SeparationReport",
    "ClampTally",
    "well_location",
    "separation_report",
]


class ClampTally:
    """Thread-safe accumulating count of clamped samples."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int) -> None:
        if n:
            with self._lock:
                self._count += int(n)

    @property
    def count(self) -> int:
        return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0


@dataclass(frozen=True)
class PotentialParams:
    """Temperatures, interface width, and evaluation safeguard.

    Attributes
    ----------
    theta : float
        Absolute temperature; must satisfy 0 < theta < theta_c.
    theta_c : float
        Critical temperature.
    eps : float
        Interface width of the phase-field energy.
    delta_clip : float
        Distance from +/-1 at which arguments are clamped before any
        logarithm is taken.
    """

    theta: float
    theta_c: float
    eps: float = 1.0
    delta_clip: float = 1e-6
    clamp_tally: ClampTally = field(
        default_factory=ClampTally, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        if not (0.0 < self.theta < self.theta_c):
            raise ValueError(
                f"need 0 < theta < theta_c, got theta={self.theta}, theta_c={self.theta_c}"
            )
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not (0.0 < self.delta_clip < 0.5):
            raise ValueError(f"delta_clip must lie in (0, 0.5), got {self.delta_clip}")

    # -- clamped evaluation ------------------------------------------------

    @property
    def clamp_bound(self) -> float:
        return 1.0 - self.delta_clip

    def clamp(self, s, count: bool = True):
        """Clamp samples into [-1+delta_clip, 1-delta_clip].

        Out-of-range samples are tallied unless ``count`` is False.
        Accepts scalars or arrays; returns the same shape.
        """
        a = np.asarray(s, dtype=np.float64)
        b = self.clamp_bound
        if count:
            self.clamp_tally.add(int(np.count_nonzero(np.abs(a) > b)))
        out = np.clip(a, -b, b)
        return float(out) if np.isscalar(s) else out

    def inside_clamp(self, s) -> np.ndarray:
        """Boolean mask of samples strictly inside the clamp range."""
        return np.abs(np.asarray(s, dtype=np.float64)) < self.clamp_bound

    # -- potential and derivatives ------------------------------------------

    def F(self, s):
        s = self.clamp(s)
        return 0.5 * self.theta * (
            (1.0 - s) * np.log1p(-s) + (1.0 + s) * np.log1p(s)
        ) - 0.5 * self.theta_c * s * s

    def F1d(self, s):
        s = self.clamp(s)
        return 0.5 * self.theta * (np.log1p(s) - np.log1p(-s)) - self.theta_c * s

    def F2d(self, s):
        s = self.clamp(s)
        return self.theta / (1.0 - s * s) - self.theta_c

    def F3d(self, s):
        s = self.clamp(s)
        return 2.0 * self.theta * s / (1.0 - s * s) ** 2

    def F4d(self, s):
        s = self.clamp(s)
        return 2.0 * self.theta * (1.0 + 3.0 * s * s) / (1.0 - s * s) ** 3

    def split_F0_F1(self, s):
        """Convex/concave split: ((F0, F0', F0''), (F1, F1', F1'')).

        F0 is the logarithmic part with F0'' = theta / (1 - s^2) >= theta;
        F1(s) = -(theta_c/2) s^2 has constant curvature -theta_c.
        """
        s = self.clamp(s)
        f0 = 0.5 * self.theta * ((1.0 - s) * np.log1p(-s) + (1.0 + s) * np.log1p(s))
        f0d = 0.5 * self.theta * (np.log1p(s) - np.log1p(-s))
        f0dd = self.theta / (1.0 - s * s)
        f1 = -0.5 * self.theta_c * s * s
        f1d = -self.theta_c * s
        f1dd = -self.theta_c * np.ones_like(np.asarray(s, dtype=np.float64))
        if np.isscalar(s) or np.ndim(s) == 0:
            f1dd = float(f1dd)
        return (f0, f0d, f0dd), (f1, f1d, f1dd)


def well_location(params: PotentialParams) -> float:
    """Positive root m_star of F' in (0, 1), located by bisection.

    The wells of F sit at +/- m_star; they satisfy
    log((1 + m)/(1 - m)) = (2 theta_c / theta) m.

    Raises
    ------
    NoRootError
        If theta >= theta_c (single-well regime, no interior root).
    """
    if params.theta >= params.theta_c:
        raise NoRootError("no double well: theta >= theta_c")

    def fprime(s: float) -> float:
        return 0.5 * params.theta * np.log((1.0 + s) / (1.0 - s)) - params.theta_c * s

    # F'' (0) < 0, so F' < 0 just right of 0; F' -> +inf as s -> 1.
    a, b = 1e-12, 1.0 - 1e-15
    fa = fprime(a)
    if fa > 0.0:  # degenerate: root essentially at 0
        return a
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = fprime(m)
        if fm == 0.0 or (b - a) < 1e-16:
            break
        if fm < 0.0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


@dataclass(frozen=True)
class SeparationReport:
    """Observed distance of a phase field from the pure phases +/-1."""

    min_phi: float
    max_phi: float
    delta_observed: float
    violated: bool


def separation_report(phi: Field) -> SeparationReport:
    """Extrema of phi and the margin delta = 1 - max|phi|."""
    lo = float(phi.values.min())
    hi = float(phi.values.max())
    delta = 1.0 - max(abs(lo), abs(hi))
    return SeparationReport(min_phi=lo, max_phi=hi, delta_observed=delta, violated=delta <= 0.0)
