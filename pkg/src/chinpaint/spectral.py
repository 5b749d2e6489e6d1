"""Uniform cell-centered grids and Neumann-spectral operators.

The domain is a rectangle [0, lx] x [0, ly] sampled at cell centers
((i + 1/2) hx, (j + 1/2) hy).  On this grid the tensor-product cosine
basis

    cos(k pi x / lx) * cos(l pi y / ly),   k = 0..nx-1, l = 0..ny-1,

is exactly the (orthonormalized) DCT-II basis, so homogeneous Neumann
boundary conditions are built into every operator here rather than
imposed through ghost cells.  The Laplacian acts diagonally with
eigenvalue -mu_kl, mu_kl = (k pi / lx)^2 + (l pi / ly)^2, and its
inverse on zero-mean data is exact mode-by-mode.

All functions are pure; fields are immutable value objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dctn, idctn

from .errors import GridMismatchError, NonBinaryMaskError, NonZeroMeanError

__all__ = [
    "Grid",
    "Field",
    "SpectralField",
    "to_spectral",
    "from_spectral",
    "laplacian",
    "inv_neumann_laplacian",
    "mean",
    "l2_inner",
    "l2_norm",
    "hminus1_norm",
    "masked",
]


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered rectangular grid.

    Attributes
    ----------
    nx, ny : int
        Number of cells per axis (at least 4 each).
    lx, ly : float
        Physical side lengths.
    """

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self) -> None:
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid must have nx, ny >= 4, got {self.nx} x {self.ny}")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError(f"grid lengths must be positive, got {self.lx} x {self.ly}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def shape(self) -> tuple[int, int]:
        """Matrix shape (ny, nx): rows run along y, columns along x."""
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate matrices (X, Y) of shape (ny, nx)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y)

    def laplace_symbol(self) -> np.ndarray:
        """Eigenvalues mu_kl >= 0 of -Laplacian, shape (ny, nx).

        Entry [l, k] is (k pi / lx)^2 + (l pi / ly)^2.
        """
        kx = (np.arange(self.nx) * np.pi / self.lx) ** 2
        ly_ = (np.arange(self.ny) * np.pi / self.ly) ** 2
        return ly_[:, None] + kx[None, :]


def _check_same_grid(a: "Field | SpectralField", b: "Field | SpectralField") -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grids differ: {a.grid} vs {b.grid}")


@dataclass(frozen=True)
class Field:
    """Scalar samples on a grid, stored row-major over (y, x).

    ``values`` has length nx*ny; entry j*nx + i is the sample at cell
    center ((i + 1/2) hx, (j + 1/2) hy).  Values must be finite.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} samples, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_matrix(cls, grid: Grid, mat: np.ndarray) -> "Field":
        mat = np.asarray(mat, dtype=np.float64)
        if mat.shape != grid.shape:
            raise ValueError(f"expected shape {grid.shape}, got {mat.shape}")
        return cls(grid, mat.reshape(-1))

    @classmethod
    def full(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.size, float(value)))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        """Sample ``fn(x, y)`` at the cell centers."""
        x, y = grid.cell_centers()
        return cls.from_matrix(grid, np.asarray(fn(x, y), dtype=np.float64))

    def as_matrix(self) -> np.ndarray:
        """Read-only view of shape (ny, nx)."""
        m = self.values.reshape(self.grid.shape)
        m.flags.writeable = False
        return m

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, other: "float | Field") -> "Field":
        if isinstance(other, Field):
            _check_same_grid(self, other)
            return Field(self.grid, self.values * other.values)
        return Field(self.grid, self.values * float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


@dataclass(frozen=True)
class SpectralField:
    """Orthonormal cosine-basis coefficients of a :class:`Field`.

    ``coeffs[l*nx + k]`` multiplies the (k, l) tensor cosine mode; the
    (0, 0) entry equals sqrt(nx*ny) times the field mean.
    """

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.float64).reshape(-1)
        if c.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} coefficients, got {c.size}")
        object.__setattr__(self, "coeffs", c)

    def as_matrix(self) -> np.ndarray:
        m = self.coeffs.reshape(self.grid.shape)
        m.flags.writeable = False
        return m


def _dct2(mat: np.ndarray) -> np.ndarray:
    return dctn(mat, type=2, norm="ortho")


def _idct2(mat: np.ndarray) -> np.ndarray:
    return idctn(mat, type=2, norm="ortho")


def to_spectral(f: Field) -> SpectralField:
    """Expand a field in the tensor cosine basis (linear, invertible)."""
    return SpectralField(f.grid, _dct2(f.values.reshape(f.grid.shape)).reshape(-1))


def from_spectral(s: SpectralField) -> Field:
    """Synthesize a field from its cosine coefficients."""
    return Field(s.grid, _idct2(s.coeffs.reshape(s.grid.shape)).reshape(-1))


def laplacian(f: Field) -> Field:
    """Neumann Laplacian: coefficient-wise multiplication by -mu_kl."""
    g = f.grid
    c = _dct2(f.values.reshape(g.shape))
    c *= -g.laplace_symbol()
    return Field(g, _idct2(c).reshape(-1))


def inv_neumann_laplacian(g_field: Field) -> Field:
    """Solve -laplacian(w) = g for the unique zero-mean w.

    Raises
    ------
    NonZeroMeanError
        If ``|mean(g)| > 1e-10 * l2_norm(g)``; the problem is solvable
        only for zero-mean right-hand sides.
    """
    g = g_field.grid
    m = mean(g_field)
    if abs(m) > 1e-10 * l2_norm(g_field):
        raise NonZeroMeanError(f"mean {m:.3e} exceeds tolerance for inverse Laplacian")
    c = _dct2(g_field.values.reshape(g.shape))
    mu = g.laplace_symbol().copy()
    mu[0, 0] = 1.0  # avoid 0/0; the mode is zeroed below
    c /= mu
    c[0, 0] = 0.0
    return Field(g, _idct2(c).reshape(-1))


def mean(f: Field) -> float:
    """Cell-average of the field, (1/|Omega|) sum f * hx * hy."""
    return float(f.values.mean())


def l2_inner(f: Field, g: Field) -> float:
    """L2 inner product with cell quadrature weights hx*hy."""
    _check_same_grid(f, g)
    return float(f.values @ g.values) * f.grid.cell_area


def l2_norm(f: Field) -> float:
    return float(np.linalg.norm(f.values)) * np.sqrt(f.grid.cell_area)


def hminus1_norm(f: Field) -> float:
    """Dual-space norm: inverse-Laplacian energy of the zero-mean part
    plus an |Omega|-weighted mean contribution.

    Computed in coefficient space: sum over nonzero modes of
    coeff^2 / mu_kl times the cell area, plus mean^2 * |Omega|.
    """
    g = f.grid
    c = _dct2(f.values.reshape(g.shape))
    mu = g.laplace_symbol().copy()
    mu[0, 0] = 1.0
    c2 = c * c / mu
    c2[0, 0] = 0.0
    m = mean(f)
    return float(np.sqrt(c2.sum() * g.cell_area + m * m * g.area))


def masked(f: Field, mask: Field) -> Field:
    """Pointwise product with a {0,1}-valued mask field."""
    _check_same_grid(f, mask)
    mv = mask.values
    if not np.all((mv == 0.0) | (mv == 1.0)):
        raise NonBinaryMaskError("mask must contain only 0 and 1")
    return Field(f.grid, f.values * mv)
