"""Benchmark task formulas, noise modes, and the pseudo-noise oracle."""

import numpy as np
import pytest

from hetbo import (
    InvalidInputError,
    TabularObjective,
    eval_objective,
    make_objective,
    sample_noisy,
    smoothed_noise_oracle,
)
from hetbo.objectives import OBJECTIVE_NAMES, gaussian_smooth


class TestFormulaValues:
    def test_sin_at_origin(self):
        f, g = eval_objective("sin-het", [0.0])
        assert f == 3.0 and g == 0.0

    def test_branin_value(self):
        f, _ = eval_objective("branin-het", [0.5, 0.25])
        assert f == pytest.approx(-0.9943, abs=2e-4)

    def test_branin_noise_at_origin(self):
        _, g = eval_objective("branin-het", [0.0, 0.0])
        assert g == 15.0

    def test_branin_noise_minimum_corner(self):
        _, g = eval_objective("branin-het", [1.0, 0.0])
        assert g == pytest.approx(7.0)

    def test_hosaki_noise_peak(self):
        _, g = eval_objective("hosaki-het", [3.5, 2.0])
        assert g == pytest.approx(50.0 / (2.5 * 2.5))

    def test_hosaki_standardisation(self):
        # raw value at (1, 2): (1 - 8 + 7 - 7/3 + 1/4) * 4 * exp(-2)
        raw = (1 - 8 + 7 - 7.0 / 3.0 + 0.25) * 4.0 * np.exp(-2.0)
        f, _ = eval_objective("hosaki-het", [1.0, 2.0])
        assert f == pytest.approx((raw - 0.817) / 0.573, rel=1e-12)

    def test_gprice_noise_peak(self):
        _, g = eval_objective("gprice-het", [0.5, 0.3])
        assert g == pytest.approx(1.5 / (0.2 * 0.3))

    def test_gprice_centre_is_log_form(self):
        # x = (0.5, 0.5) maps to the origin of the unscaled function where
        # the bracketed factors reduce to (1 + 19) and 30
        f, _ = eval_objective("gprice-het", [0.5, 0.5])
        assert f == pytest.approx((np.log(20.0 * 30.0) - 8.693) / 2.427, rel=1e-12)

    def test_out_of_bounds_rejected(self):
        with pytest.raises(InvalidInputError):
            eval_objective("sin-het", [11.0])
        with pytest.raises(InvalidInputError):
            eval_objective("branin-het", [0.5, -0.1])

    def test_unknown_name_rejected(self):
        with pytest.raises(InvalidInputError):
            make_objective("rosenbrock")

    @pytest.mark.parametrize("name", OBJECTIVE_NAMES)
    def test_noise_nonnegative_on_grid(self, name):
        obj = make_objective(name)
        if obj.dim == 1:
            grid = [np.array([v]) for v in np.linspace(*obj.bounds[0], 200)]
        else:
            a = np.linspace(*obj.bounds[0], 200)
            b = np.linspace(*obj.bounds[1], 200)
            A, B = np.meshgrid(a, b)
            grid = np.column_stack([A.ravel(), B.ravel()])
        g = np.array([obj.g(x) for x in grid])
        assert np.all(g >= 0)

    def test_purity_replay(self):
        obj = make_objective("branin-het")
        x = np.array([0.37, 0.81])
        first = obj.eval(x)
        assert all(obj.eval(x) == first for _ in range(1000))

    @pytest.mark.slow
    def test_purity_million_call_replay(self):
        obj = make_objective("branin-het")
        x = np.array([0.37, 0.81])
        first = obj.eval(x)
        assert all(obj.eval(x) == first for _ in range(1_000_000))


class TestNoiseModes:
    def test_off_mode_is_deterministic(self):
        obj = make_objective("branin-het", noise="off")
        y = sample_noisy(obj, [0.3, 0.3], seed=0)
        f, g = obj.eval([0.3, 0.3])
        assert y == f and g == 0.0

    def test_homoscedastic_moment_check(self):
        obj = make_objective("hosaki-het", noise="homo:25")
        x = np.array([2.0, 2.0])
        rng = np.random.default_rng(0)
        draws = np.array([obj.sample(x, rng) for _ in range(100_000)])
        assert abs(draws.std() - 25.0) / 25.0 < 0.02

    def test_het_moment_check(self):
        obj = make_objective("sin-het")
        x = np.array([8.0])
        rng = np.random.default_rng(1)
        draws = np.array([obj.sample(x, rng) for _ in range(100_000)])
        assert abs(draws.std() - 0.5 * 8.0) / (0.5 * 8.0) < 0.02

    def test_equal_seeds_equal_draws(self):
        obj = make_objective("gprice-het")
        assert sample_noisy(obj, [0.4, 0.4], seed=7) == sample_noisy(obj, [0.4, 0.4], seed=7)

    def test_bad_mode_rejected(self):
        with pytest.raises(InvalidInputError):
            make_objective("sin-het", noise="gaussian")
        with pytest.raises(InvalidInputError):
            make_objective("sin-het", noise="homo:-1")


class TestTabularObjective:
    def _toy(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        return TabularObjective(X, [10.0, 20.0, 30.0, 40.0],
                                noise_std=[1.0, 2.0, 3.0, 4.0])

    def test_closest_row_consumed_once(self):
        obj = self._toy()
        x, y, f, g = obj.query_closest([0.9])
        assert y == 20.0 and g == 2.0
        # the consumed row cannot be returned again
        x2, y2, _, _ = obj.query_closest([0.9])
        assert y2 != 20.0
        assert obj.n_remaining == 2

    def test_exhaustion_raises(self):
        obj = self._toy()
        for _ in range(4):
            obj.query_closest([0.0])
        with pytest.raises(InvalidInputError):
            obj.query_closest([0.0])

    def test_query_index_guard(self):
        obj = self._toy()
        obj.query_index(2)
        with pytest.raises(InvalidInputError):
            obj.query_index(2)

    def test_standardised_distance(self):
        # second feature has a huge scale; standardisation keeps it from
        # dominating the match
        X = np.array([[0.0, 1000.0], [1.0, 0.0]])
        obj = TabularObjective(X, [1.0, 2.0])
        _, y, _, _ = obj.query_closest([0.1, 900.0])
        assert y == 1.0


class TestNoiseOracle:
    def test_constant_residuals_average_to_constant(self):
        X = np.linspace(0, 5, 11).reshape(-1, 1)
        smoothed = gaussian_smooth(X, np.full(11, 0.7), bandwidth=1.0)
        np.testing.assert_allclose(smoothed, 0.7, rtol=1e-12)

    def test_tiny_bandwidth_localises(self):
        X = np.linspace(0, 5, 6).reshape(-1, 1)
        vals = np.zeros(6)
        vals[2] = 4.0
        smoothed = gaussian_smooth(X, vals, bandwidth=1e-3)
        assert smoothed[2] == pytest.approx(4.0, abs=1e-10)
        assert np.all(np.abs(np.delete(smoothed, 2)) < 1e-10)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(0, 5, size=(25, 1))
        y = np.sin(X[:, 0]) + 0.3 * X[:, 0] * rng.normal(size=25)
        var = smoothed_noise_oracle(X, y, bandwidth=1.0, n_restarts=3, random_state=0)
        perm = rng.permutation(25)
        var_p = smoothed_noise_oracle(X[perm], y[perm], bandwidth=1.0,
                                      n_restarts=3, random_state=0)
        np.testing.assert_allclose(var[perm], var_p, rtol=1e-8)

    def test_bandwidth_guard(self):
        with pytest.raises(InvalidInputError):
            gaussian_smooth(np.zeros((3, 1)), np.zeros(3), bandwidth=0.0)

    def test_tracks_heteroscedastic_profile(self):
        rng = np.random.default_rng(1)
        X = np.sort(rng.uniform(0, 10, 120)).reshape(-1, 1)
        y = np.sin(X[:, 0]) + (0.5 * X[:, 0]) * rng.normal(size=120)
        var = smoothed_noise_oracle(X, y, bandwidth=1.0, n_restarts=3, random_state=0)
        corr = np.corrcoef(np.sqrt(var), 0.5 * X[:, 0])[0, 1]
        assert corr > 0.5
