"""Sequential optimisation loop behaviour."""

import numpy as np
import pytest
from scipy.stats import chisquare

from hetbo import (
    AcquisitionSpec,
    BOConfig,
    InvalidInputError,
    SyntheticObjective,
    composite_eval,
    make_objective,
    run_bo,
    run_bo_seeds,
)
from hetbo.bo import _Surrogate, propose


def quadratic_objective(noise=0.0):
    return SyntheticObjective(
        name="quadratic",
        f=lambda x: (x[0] - 0.31) ** 2,
        g=lambda x: noise,
        bounds=[[-2.0, 2.0]],
    )


def ei_config(**kw):
    base = dict(
        acquisition=AcquisitionSpec(kind="ei"),
        surrogate="homoscedastic",
        init_size=5,
        iterations=3,
        bounds=np.array([[-2.0, 2.0]]),
        seed=0,
        n_restarts=3,
    )
    base.update(kw)
    return BOConfig(**base)


class TestConfigValidation:
    def test_exactly_one_domain(self):
        with pytest.raises(InvalidInputError):
            ei_config(bounds=None, candidates=None)
        with pytest.raises(InvalidInputError):
            ei_config(candidates=np.zeros((10, 1)))

    def test_noise_acquisitions_need_mlhgp(self):
        with pytest.raises(InvalidInputError):
            ei_config(acquisition=AcquisitionSpec(kind="anpei", beta=0.5))

    def test_candidate_set_must_cover_init(self):
        with pytest.raises(InvalidInputError):
            ei_config(bounds=None, candidates=np.zeros((3, 1)), init_size=5)


class TestTraceShape:
    def test_zero_iterations_is_pure_initialisation(self):
        trace = run_bo(quadratic_objective(), ei_config(iterations=0))
        assert len(trace) == 5
        assert all(p == "init" for p in trace.phase)
        assert trace.best_h[-1] == pytest.approx(
            min(0.5 * f for f in trace.f_true)
        )

    def test_record_count_and_monotonicity(self):
        obj = make_objective("sin-het")
        trace = run_bo(obj, ei_config(bounds=obj.bounds, iterations=4))
        assert len(trace) == 9
        assert np.all(np.diff(trace.best_h) <= 0)
        assert np.all(np.diff(trace.lowest_g) <= 0)

    def test_maximisation_composite_sign(self):
        # for the maximising sin task the recorded composite is
        # alpha*(-f) + (1-alpha)*g so lower stays better
        obj = make_objective("sin-het")
        trace = run_bo(obj, ei_config(bounds=obj.bounds, iterations=0, alpha=0.5))
        expected = 0.5 * -trace.f_true + 0.5 * trace.g_true
        running = np.minimum.accumulate(expected)
        np.testing.assert_allclose(trace.best_h, running, rtol=1e-12)

    def test_random_acquisition_is_seed_deterministic(self):
        obj = make_objective("branin-het")
        cfg = ei_config(acquisition=AcquisitionSpec(kind="random"),
                        bounds=obj.bounds, iterations=6, seed=123)
        t1, t2 = run_bo(obj, cfg), run_bo(obj, cfg)
        assert np.array_equal(t1.x, t2.x)
        assert np.array_equal(t1.y, t2.y)

    def test_ei_run_is_seed_deterministic(self):
        obj = quadratic_objective(noise=0.1)
        cfg = ei_config(iterations=2, seed=5)
        t1, t2 = run_bo(obj, cfg), run_bo(obj, cfg)
        assert np.array_equal(t1.x, t2.x) and np.array_equal(t1.y, t2.y)


class TestCandidateSets:
    def test_grid_quadratic_finds_global_minimiser(self):
        grid = np.linspace(-2, 2, 50).reshape(-1, 1)
        cfg = ei_config(bounds=None, candidates=grid, init_size=5, iterations=10,
                        seed=3)
        trace = run_bo(quadratic_objective(), cfg)
        best_idx = int(np.argmin((grid[:, 0] - 0.31) ** 2))
        queried = {float(v) for v in trace.x[:, 0]}
        assert float(grid[best_idx, 0]) in queried

    def test_no_candidate_queried_twice(self):
        grid = np.linspace(-2, 2, 12).reshape(-1, 1)
        cfg = ei_config(bounds=None, candidates=grid, init_size=4, iterations=8,
                        seed=1)
        trace = run_bo(quadratic_objective(noise=0.5), cfg)
        assert len({float(v) for v in trace.x[:, 0]}) == len(trace)

    def test_exhaustion_terminates_early_with_flag(self):
        grid = np.linspace(-2, 2, 6).reshape(-1, 1)
        cfg = ei_config(bounds=None, candidates=grid, init_size=4, iterations=10,
                        seed=2)
        trace = run_bo(quadratic_objective(), cfg)
        assert trace.exhausted
        assert len(trace) == 6

    @pytest.mark.slow
    def test_random_candidate_distribution_uniform(self):
        values = np.linspace(-2, 2, 20)
        grid = values.reshape(-1, 1)
        counts = np.zeros(20)
        for seed in range(10_000):
            cfg = ei_config(acquisition=AcquisitionSpec(kind="random"),
                            bounds=None, candidates=grid, init_size=1,
                            iterations=1, seed=seed)
            trace = run_bo(quadratic_objective(noise=0.1), cfg)
            counts[int(np.argmin(np.abs(values - trace.x[1, 0])))] += 1
        assert chisquare(counts).pvalue > 0.01


class TestPropose:
    def _surrogate(self, X, y, cfg):
        s = _Surrogate(cfg, [np.random.SeedSequence(0)])
        s.fit(X, y)
        return s

    def test_single_candidate_returned(self):
        cfg = ei_config(bounds=None, candidates=np.array([[0.7]]), init_size=1)
        X = np.array([[0.0], [1.0]])
        s = self._surrogate(X, np.array([0.1, 0.4]), cfg)
        pick, _ = propose(s, cfg.acquisition, cfg, np.random.default_rng(0), X,
                          remaining=np.array([0]))
        assert pick == 0

    def test_tie_breaks_to_first_candidate(self):
        cfg = ei_config(bounds=None, candidates=np.array([[5.0], [6.0], [7.0]]),
                        init_size=1)

        class Flat:
            def stats(self, Xq):
                n = len(Xq)
                return np.zeros(n), np.ones(n), np.ones(n)

            def incumbent(self, X_obs):
                return 0.0

        pick, _ = propose(Flat(), cfg.acquisition, cfg, np.random.default_rng(0),
                          np.zeros((1, 1)), remaining=np.arange(3))
        assert pick == 0

    def test_continuous_matches_dense_grid(self):
        X = np.array([[-1.0], [1.0]])
        y = np.array([0.5, -0.5])
        cfg = ei_config()
        s = self._surrogate(X, y, cfg)
        pick, value = propose(s, cfg.acquisition, cfg, np.random.default_rng(42), X)
        dense = np.linspace(-2, 2, 1_000_000).reshape(-1, 1)
        from hetbo.bo import _acq_on

        dense_vals = _acq_on(s, cfg.acquisition, dense, s.incumbent(X))
        x_star = dense[np.argmax(dense_vals), 0]
        assert abs(pick[0] - x_star) < 1e-2


class TestCompositeEval:
    def test_alpha_extremes(self):
        obj = make_objective("branin-het")
        x = [0.25, 0.5]
        f, g = obj.eval(x)
        assert composite_eval(obj, x, 1.0)[0] == pytest.approx(f)
        assert composite_eval(obj, x, 0.0)[0] == pytest.approx(g)

    def test_sin_task_substitution(self):
        obj = make_objective("sin-het")
        h, f, g = composite_eval(obj, [0.0], 0.5)
        assert (f, g) == (3.0, 0.0)
        assert h == pytest.approx(1.5)

    def test_tabular_objectives_unsupported(self):
        from hetbo import TabularObjective

        obj = TabularObjective(np.zeros((3, 1)), [1.0, 2.0, 3.0])
        with pytest.raises(InvalidInputError):
            composite_eval(obj, [0.0], 0.5)


class TestSeedFanOut:
    def test_spec_dict_runs_in_processes(self):
        spec = {"kind": "synthetic", "name": "sin-het", "noise": "het"}
        cfg = ei_config(bounds=np.array([[0.0, 10.0]]), iterations=1)
        traces = run_bo_seeds(spec, cfg, seeds=[11, 12, 13], max_workers=2)
        assert [t.seed for t in traces] == [11, 12, 13]

    def test_worker_cap_env(self, monkeypatch):
        monkeypatch.setenv("HETGP_THREADS", "1")
        spec = {"kind": "synthetic", "name": "sin-het", "noise": "off"}
        cfg = ei_config(bounds=np.array([[0.0, 10.0]]), iterations=0)
        traces = run_bo_seeds(spec, cfg, seeds=[1, 2])
        assert len(traces) == 2
