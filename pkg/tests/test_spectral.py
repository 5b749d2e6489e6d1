"""Spectral grid operators: transforms, Laplacians, norms."""

import numpy as np
import pytest

import chinpaint as cp
from chinpaint.errors import GridMismatchError, NonBinaryMaskError, NonZeroMeanError

from support import smooth_random_field


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return cp.Field(grid, rng.standard_normal(grid.size))


class TestGridAndField:
    def test_grid_validation(self):
        with pytest.raises(ValueError):
            cp.Grid(3, 8, 1.0, 1.0)
        with pytest.raises(ValueError):
            cp.Grid(8, 8, -1.0, 1.0)

    def test_field_shape_and_finiteness(self):
        g = cp.Grid(4, 6, 1.0, 2.0)
        with pytest.raises(ValueError):
            cp.Field(g, np.zeros(5))
        with pytest.raises(ValueError):
            cp.Field(g, np.full(24, np.nan))

    def test_arithmetic_requires_same_grid(self):
        a = cp.Field.full(cp.Grid(4, 4, 1.0, 1.0), 1.0)
        b = cp.Field.full(cp.Grid(4, 4, 2.0, 1.0), 1.0)
        with pytest.raises(GridMismatchError):
            _ = a + b

    def test_cell_centers_match_dct_grid(self):
        g = cp.Grid(8, 4, 2.0, 1.0)
        x, y = g.cell_centers()
        assert x[0, 0] == pytest.approx(0.5 * g.hx)
        assert y[-1, 0] == pytest.approx(1.0 - 0.5 * g.hy)


class TestTransforms:
    def test_constant_hits_only_zero_mode(self):
        g = cp.Grid(8, 8, 1.0, 1.0)
        s = cp.to_spectral(cp.Field.full(g, 3.0))
        c = s.as_matrix()
        assert abs(c[0, 0] - 3.0 * np.sqrt(g.size)) < 1e-12
        off = c.copy()
        off[0, 0] = 0.0
        assert np.max(np.abs(off)) < 1e-12

    def test_single_cosine_is_pure_mode(self):
        g = cp.Grid(16, 8, 2.0, 1.0)
        f = cp.Field.from_function(g, lambda x, y: np.cos(np.pi * x / g.lx))
        c = cp.to_spectral(f).as_matrix()
        mask = np.zeros_like(c, dtype=bool)
        mask[0, 1] = True
        assert np.max(np.abs(c[~mask])) < 1e-12
        assert abs(c[0, 1]) > 1.0

    def test_matches_naive_cosine_sum(self):
        # direct O(N^2) projection onto the orthonormalized cosine basis
        g = cp.Grid(8, 6, 1.5, 1.0)
        f = random_field(g, 0)
        c = cp.to_spectral(f).as_matrix()
        x, y = g.cell_centers()
        naive = np.zeros(g.shape)
        for l in range(g.ny):
            for k in range(g.nx):
                basis = np.cos(k * np.pi * x / g.lx) * np.cos(l * np.pi * y / g.ly)
                basis *= np.sqrt((2.0 if k else 1.0) / g.nx)
                basis *= np.sqrt((2.0 if l else 1.0) / g.ny)
                naive[l, k] = np.sum(f.as_matrix() * basis)
        assert np.max(np.abs(c - naive)) < 1e-10

    def test_round_trip_and_linearity(self):
        for n in (8, 16, 32, 64):
            g = cp.Grid(n, n, 1.0, 1.0)
            f = random_field(g, n)
            h = random_field(g, n + 1)
            back = cp.from_spectral(cp.to_spectral(f))
            assert cp.l2_norm(back - f) <= 1e-12 * cp.l2_norm(f)
            lin = cp.to_spectral(2.5 * f + (-1.5) * h).coeffs
            split = 2.5 * cp.to_spectral(f).coeffs - 1.5 * cp.to_spectral(h).coeffs
            assert np.max(np.abs(lin - split)) < 1e-12 * max(1.0, np.max(np.abs(lin)))

    def test_from_spectral_synthesizes_single_mode(self):
        g = cp.Grid(8, 8, 1.0, 2.0)
        coeffs = np.zeros(g.shape)
        coeffs[2, 1] = 1.0
        f = cp.from_spectral(cp.SpectralField(g, coeffs.reshape(-1)))
        x, y = g.cell_centers()
        expected = (
            np.cos(np.pi * x / g.lx) * np.cos(2 * np.pi * y / g.ly)
            * np.sqrt(2.0 / g.nx) * np.sqrt(2.0 / g.ny)
        )
        assert np.max(np.abs(f.as_matrix() - expected)) < 1e-12

    def test_parseval(self):
        g = cp.Grid(16, 16, 1.0, 3.0)
        f = random_field(g, 4)
        c = cp.to_spectral(f).coeffs
        assert cp.l2_norm(f) ** 2 == pytest.approx(np.sum(c * c) * g.cell_area, rel=1e-10)


class TestLaplacian:
    def test_constant_annihilated(self):
        g = cp.Grid(8, 8, 1.0, 1.0)
        out = cp.laplacian(cp.Field.full(g, 7.0))
        assert np.max(np.abs(out.values)) < 1e-12

    def test_exact_eigenpair(self):
        g = cp.Grid(16, 16, 2.0, 1.0)
        f = cp.Field.from_function(g, lambda x, y: np.cos(np.pi * x / g.lx))
        out = cp.laplacian(f)
        assert np.max(np.abs(out.values + (np.pi / g.lx) ** 2 * f.values)) < 1e-12

    def test_zero_mean_output(self):
        g = cp.Grid(32, 32, 1.0, 1.0)
        f = random_field(g, 5)
        assert abs(cp.mean(cp.laplacian(f))) <= 1e-12 * cp.l2_norm(f)

    def test_second_order_agreement_with_stencil(self):
        # the 5-point stencil converges at O(h^2) to the spectral value
        def stencil(fm, hx, hy):
            p = np.pad(fm, 1, mode="edge")  # Neumann reflection at cell faces
            return (
                (p[1:-1, :-2] - 2 * fm + p[1:-1, 2:]) / hx**2
                + (p[:-2, 1:-1] - 2 * fm + p[2:, 1:-1]) / hy**2
            )

        # random smooth Neumann-compatible function (finite cosine sum)
        rng = np.random.default_rng(12)
        amps = rng.standard_normal((5, 5))

        def smooth(x, y):
            out = np.zeros_like(x)
            for l in range(5):
                for k in range(5):
                    out += amps[l, k] * np.cos(k * np.pi * x) * np.cos(l * np.pi * y)
            return out

        errs = []
        for n in (16, 32, 64, 128):
            g = cp.Grid(n, n, 1.0, 1.0)
            f = cp.Field.from_function(g, smooth)
            lap = cp.laplacian(f).as_matrix()
            st = stencil(f.as_matrix(), g.hx, g.hy)
            errs.append(np.sqrt(np.mean((lap - st) ** 2)))
        slopes = np.diff(np.log(errs)) / np.log(0.5)
        assert slopes.mean() >= 1.9


class TestInverseLaplacian:
    def test_zero_in_zero_out(self):
        g = cp.Grid(8, 8, 1.0, 1.0)
        out = cp.inv_neumann_laplacian(cp.Field.zeros(g))
        assert np.max(np.abs(out.values)) == 0.0

    def test_eigenvalue_inversion(self):
        g = cp.Grid(16, 16, 2.0, 1.0)
        f = cp.Field.from_function(g, lambda x, y: np.cos(np.pi * x / g.lx))
        w = cp.inv_neumann_laplacian(f)
        assert np.max(np.abs(w.values - (g.lx / np.pi) ** 2 * f.values)) < 1e-12

    def test_round_trip_on_zero_mean(self):
        g = cp.Grid(32, 32, 1.0, 1.0)
        f = random_field(g, 9)
        f = cp.Field(g, f.values - f.values.mean())
        w = cp.inv_neumann_laplacian(f)
        assert cp.l2_norm(cp.laplacian(w) + f) <= 1e-10 * cp.l2_norm(f)
        assert abs(cp.mean(w)) < 1e-12

    def test_rejects_nonzero_mean(self):
        g = cp.Grid(8, 8, 1.0, 1.0)
        with pytest.raises(NonZeroMeanError):
            cp.inv_neumann_laplacian(cp.Field.full(g, 1.0))


class TestNormsAndMasks:
    def test_mean_examples(self):
        g = cp.Grid(16, 16, 1.0, 1.0)
        assert cp.mean(cp.Field.full(g, 2.5)) == pytest.approx(2.5)
        cosx = cp.Field.from_function(g, lambda x, y: np.cos(np.pi * x))
        assert abs(cp.mean(cosx)) < 1e-14
        half = np.zeros(g.shape)
        half[:, : g.nx // 2] = 2.0
        assert cp.mean(cp.Field.from_matrix(g, half)) == pytest.approx(1.0)

    def test_inner_products(self):
        g = cp.Grid(16, 16, 2.0, 1.5)
        one = cp.Field.full(g, 1.0)
        assert cp.l2_inner(one, one) == pytest.approx(g.area)
        f = random_field(g, 2)
        assert cp.l2_inner(f, f) == pytest.approx(cp.l2_norm(f) ** 2)
        c1 = cp.Field.from_function(g, lambda x, y: np.cos(np.pi * x / g.lx))
        c2 = cp.Field.from_function(g, lambda x, y: np.cos(3 * np.pi * x / g.lx))
        assert abs(cp.l2_inner(c1, c2)) < 1e-12

    def test_hminus1_norm_values(self):
        g = cp.Grid(32, 32, 1.0, 1.0)
        assert cp.hminus1_norm(cp.Field.zeros(g)) == 0.0
        # eigenmode: a * (lx/pi) * sqrt(lx*ly/2)
        a = 1.7
        f = cp.Field.from_function(g, lambda x, y: a * np.cos(np.pi * x / g.lx))
        expected = a * (g.lx / np.pi) * np.sqrt(g.area / 2.0)
        assert cp.hminus1_norm(f) == pytest.approx(expected, rel=1e-12)
        # quadrature cross-check of the same eigen-computation
        w = cp.inv_neumann_laplacian(f)
        assert cp.hminus1_norm(f) == pytest.approx(np.sqrt(cp.l2_inner(f, w)), rel=1e-12)
        # pure mean part
        assert cp.hminus1_norm(cp.Field.full(g, -2.0)) == pytest.approx(2.0 * np.sqrt(g.area))

    def test_hminus1_homogeneity(self):
        g = cp.Grid(16, 16, 1.0, 1.0)
        f = smooth_random_field(g, 3)
        assert cp.hminus1_norm(-3.5 * f) == pytest.approx(3.5 * cp.hminus1_norm(f), rel=1e-12)

    def test_masked(self):
        g = cp.Grid(8, 8, 1.0, 1.0)
        f = cp.Field.full(g, 3.0)
        ones = cp.Field.full(g, 1.0)
        zeros = cp.Field.zeros(g)
        assert np.array_equal(cp.masked(f, ones).values, f.values)
        assert np.max(np.abs(cp.masked(f, zeros).values)) == 0.0
        half = np.zeros(g.size)
        half[: g.size // 2] = 1.0
        out = cp.masked(f, cp.Field(g, half))
        assert set(np.unique(out.values)) == {0.0, 3.0}
        with pytest.raises(NonBinaryMaskError):
            cp.masked(f, cp.Field.full(g, 0.5))
