"""Double-well potential, derivative chains, wells, separation."""

import numpy as np
import pytest

import chinpaint as cp
from chinpaint.errors import NoRootError
from chinpaint.potential import PotentialParams, well_location


@pytest.fixture
def params():
    return PotentialParams(theta=1.0, theta_c=2.0)


def test_parameter_validation():
    with pytest.raises(ValueError):
        PotentialParams(theta=2.0, theta_c=1.0)
    with pytest.raises(ValueError):
        PotentialParams(theta=1.0, theta_c=2.0, eps=0.0)
    with pytest.raises(ValueError):
        PotentialParams(theta=1.0, theta_c=2.0, delta_clip=0.7)


def test_values_at_zero(params):
    assert params.F(0.0) == 0.0
    assert params.F1d(0.0) == 0.0
    assert params.F2d(0.0) == pytest.approx(params.theta - params.theta_c)
    assert params.F2d(0.0) < 0.0


def test_known_value():
    p = PotentialParams(theta=1.0, theta_c=2.0)
    # F'(1/2) = (1/2) ln 3 - 1
    assert p.F1d(0.5) == pytest.approx(0.5 * np.log(3.0) - 1.0, abs=1e-15)
    fd = (p.F(0.5 + 1e-6) - p.F(0.5 - 1e-6)) / 2e-6
    assert p.F1d(0.5) == pytest.approx(fd, abs=1e-8)


def test_derivative_chain_matches_central_differences(params):
    s = np.linspace(-0.95, 0.95, 381)
    h = 1e-5
    chains = [
        (params.F, params.F1d),
        (params.F1d, params.F2d),
        (params.F2d, params.F3d),
        (params.F3d, params.F4d),
    ]
    for f, fd in chains:
        numeric = (np.asarray(f(s + h)) - np.asarray(f(s - h))) / (2 * h)
        exact = np.asarray(fd(s))
        scale = np.maximum(np.abs(exact), 1.0)
        assert np.max(np.abs(numeric - exact) / scale) <= 1e-6


def test_parity(params):
    s = np.linspace(-0.9, 0.9, 101)
    assert np.max(np.abs(np.asarray(params.F(s)) - params.F(-s))) < 1e-14
    assert np.max(np.abs(np.asarray(params.F1d(s)) + params.F1d(-s))) < 1e-14
    assert np.max(np.abs(np.asarray(params.F2d(s)) - params.F2d(-s))) < 1e-14
    assert np.max(np.abs(np.asarray(params.F3d(s)) + params.F3d(-s))) < 1e-14
    assert np.max(np.abs(np.asarray(params.F4d(s)) - params.F4d(-s))) < 1e-14


class TestSplitting:
    def test_split_pieces(self, params):
        (f0, f0d, f0dd), (f1, f1d, f1dd) = params.split_F0_F1(0.0)
        assert f0 == 0.0 and f0d == 0.0
        assert f0dd == pytest.approx(params.theta)
        assert f1dd == pytest.approx(-params.theta_c)

    def test_split_sums_to_f(self, params):
        rng = np.random.default_rng(0)
        s = rng.uniform(-0.99, 0.99, 100)
        (f0, _, _), (f1, _, _) = params.split_F0_F1(s)
        assert np.max(np.abs(f0 + f1 - np.asarray(params.F(s)))) < 1e-14

    def test_convexity_of_log_part(self, params):
        s = np.linspace(-params.clamp_bound, params.clamp_bound, 10_000)
        (_, _, f0dd), _ = params.split_F0_F1(s)
        assert np.min(f0dd) >= params.theta


class TestWellLocation:
    def test_near_critical_well_is_small(self):
        p = PotentialParams(theta=1.0, theta_c=1.001)
        assert 0.0 < well_location(p) < 0.1

    @pytest.mark.parametrize("theta,theta_c", [(1.0, 2.0), (1.0, 1.5), (0.5, 1.0)])
    def test_root_residual(self, theta, theta_c):
        p = PotentialParams(theta=theta, theta_c=theta_c)
        m = well_location(p)
        assert 0.0 < m < 1.0
        assert abs(p.F1d(m)) <= 1e-12
        # defining relation: log((1+m)/(1-m)) = 2 theta_c m / theta
        assert np.log((1 + m) / (1 - m)) == pytest.approx(2 * theta_c * m / theta, rel=1e-10)

    def test_wells_are_equal_minima_below_zero(self, params):
        m = well_location(params)
        assert params.F1d(-m) == pytest.approx(0.0, abs=1e-12)
        assert params.F(m) == pytest.approx(params.F(-m), abs=1e-14)
        assert params.F(m) < params.F(0.0)

    def test_no_root_without_double_well(self):
        bad = PotentialParams.__new__(PotentialParams)
        object.__setattr__(bad, "theta", 2.0)
        object.__setattr__(bad, "theta_c", 1.0)
        with pytest.raises(NoRootError):
            well_location(bad)


class TestClampAndSeparation:
    def test_clamp_counts_out_of_range(self):
        p = PotentialParams(theta=1.0, theta_c=2.0, delta_clip=1e-4)
        p.F1d(np.array([0.0, 0.5, 0.99999, -1.5]))
        assert p.clamp_tally.count == 2
        p.F2d(np.array([0.0, 0.1]))
        assert p.clamp_tally.count == 2  # in-range evaluations add nothing
        p.clamp_tally.reset()
        assert p.clamp_tally.count == 0

    def test_separation_report(self):
        g = cp.Grid(4, 4, 1.0, 1.0)
        rep = cp.separation_report(cp.Field.zeros(g))
        assert rep.delta_observed == 1.0 and not rep.violated
        rep = cp.separation_report(cp.Field.full(g, 0.99))
        assert rep.delta_observed == pytest.approx(0.01)
        vals = np.zeros(g.size)
        vals[3] = 1.0
        rep = cp.separation_report(cp.Field(g, vals))
        assert rep.violated
