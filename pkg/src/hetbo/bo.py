"""Sequential optimisation loop with noise-aware surrogates.

One run draws an initial design, then alternates surrogate refits,
acquisition maximisation and noisy objective evaluations, recording a
trace of the running best composite value and the lowest noise magnitude
found. Maximisation problems are negated internally so the whole loop
works in minimisation convention; the composite weight alpha only affects
trace bookkeeping, never the decisions.
"""

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .acquisition import AcquisitionSpec, evaluate_acquisition
from .exceptions import InvalidInputError
from .gp import GPRegressor
from .hetgp import MostLikelyHeteroscedasticGP
from .objectives import SyntheticObjective, TabularObjective, make_objective

logger = logging.getLogger(__name__)

__all__ = ["BOConfig", "BOTrace", "run_bo", "run_bo_seeds", "propose", "composite_eval"]


@dataclass(frozen=True)
class BOConfig:
    acquisition: AcquisitionSpec
    surrogate: str = "homoscedastic"  # or "mlhgp"
    init_size: int = 25
    iterations: int = 10
    bounds: Optional[np.ndarray] = None  # continuous box, (d, 2)
    candidates: Optional[np.ndarray] = None  # finite candidate set
    alpha: float = 0.5  # evaluation-only composite weight
    seed: int = 0
    kernel: Optional[object] = None  # surrogate covariance, default SQE
    n_restarts: int = 20  # halved (with a warm start) after initialisation
    mlhgp_iters: int = 10
    mlhgp_tol: Optional[float] = None
    sample_size: int = 100
    jitter: float = 1e-6
    acq_samples: int = 1000
    refine_top: int = 10
    refine_steps: int = 20

    def __post_init__(self):
        if self.init_size < 1:
            raise InvalidInputError("init_size must be >= 1")
        if self.iterations < 0:
            raise InvalidInputError("iterations must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInputError("alpha must lie in [0, 1]")
        if (self.bounds is None) == (self.candidates is None):
            raise InvalidInputError("exactly one of bounds/candidates must be set")
        if self.surrogate not in ("homoscedastic", "mlhgp"):
            raise InvalidInputError("surrogate must be 'homoscedastic' or 'mlhgp'")
        if self.acquisition.needs_noise_model and self.surrogate != "mlhgp":
            raise InvalidInputError(
                f"{self.acquisition.kind} needs the mlhgp surrogate"
            )
        if self.candidates is not None:
            object.__setattr__(self, "candidates", np.atleast_2d(np.asarray(self.candidates, float)))
            if self.candidates.shape[0] < self.init_size:
                raise InvalidInputError("candidate set smaller than init_size")
        if self.bounds is not None:
            b = np.atleast_2d(np.asarray(self.bounds, float))
            if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 1] <= b[:, 0]):
                raise InvalidInputError("bounds must be a (d, 2) box with lo < hi")
            object.__setattr__(self, "bounds", b)


@dataclass
class BOTrace:
    """Per-evaluation records of one optimisation run."""

    seed: int
    direction: str
    x: np.ndarray
    y: np.ndarray
    f_true: np.ndarray
    g_true: np.ndarray
    best_h: np.ndarray  # running best composite, minimisation convention
    lowest_g: np.ndarray
    acq_value: np.ndarray
    phase: list
    wall_ms: np.ndarray
    exhausted: bool = False
    config: Optional[BOConfig] = None

    def __len__(self):
        return len(self.y)

    def to_frame(self):
        import pandas as pd

        d = self.x.shape[1]
        cols = {"seed": self.seed, "iter": np.arange(len(self)), "phase": self.phase}
        for k in range(d):
            cols[f"x{k}"] = self.x[:, k]
        cols.update(
            y=self.y,
            f_true=self.f_true,
            g_true=self.g_true,
            best_h=self.best_h,
            lowest_g=self.lowest_g,
            acq_value=self.acq_value,
            wall_ms=self.wall_ms,
        )
        return pd.DataFrame(cols)


def composite_eval(objective, x, alpha):
    """Evaluation-time composite (h, f, g) in the task's native direction.

    h = alpha*f + (1-alpha)*g for minimisation tasks and
    h = alpha*f - (1-alpha)*g when the task maximises f.
    """
    if isinstance(objective, TabularObjective):
        raise InvalidInputError(
            "composite evaluation needs an analytic objective; tabular runs "
            "record composites in the trace instead"
        )
    f, g = objective.eval(x)
    sgn = -1.0 if objective.direction == "maximise" else 1.0
    return alpha * f + sgn * (1.0 - alpha) * g, f, g


class _Surrogate:
    """Refittable surrogate exposing standardised posterior statistics."""

    def __init__(self, config, fit_seeds):
        self.config = config
        self.fit_seeds = fit_seeds
        self.model = None
        self._warm = None
        self._n_fits = 0

    def fit(self, X, y):
        cfg = self.config
        restarts = cfg.n_restarts if self._n_fits == 0 else max(1, cfg.n_restarts // 2)
        seed = self.fit_seeds.pop(0)
        if cfg.surrogate == "mlhgp":
            model = MostLikelyHeteroscedasticGP(
                kernel=cfg.kernel,
                max_iter=cfg.mlhgp_iters,
                sample_size=cfg.sample_size,
                n_restarts=restarts,
                tol=cfg.mlhgp_tol,
                jitter=cfg.jitter,
                random_state=seed,
            )
            model.fit(X, y, initial_thetas=[self._warm] if self._warm is not None else None)
            self._warm = model.g_latent_.kernel_.theta
        else:
            model = GPRegressor(
                kernel=cfg.kernel, n_restarts=restarts, jitter=cfg.jitter,
                random_state=seed,
            )
            model.fit(
                X, y,
                initial_thetas=[self._warm] if self._warm is not None else None,
            )
            self._warm = model._packed_theta_
        self.model = model
        self._n_fits += 1

    def stats(self, Xq):
        """(mean, epistemic var, aleatoric var) in standardised units."""
        m = self.model
        if isinstance(m, MostLikelyHeteroscedasticGP):
            mean, var_epi, var_alea = m.predict_components(Xq)
        else:
            mean, std = m.predict(Xq, return_std=True)
            var_epi = std**2
            var_alea = np.full_like(var_epi, m.noise_variance_ * m.y_std_**2)
        scale = m.y_std_
        return (mean - m.y_mean_) / scale, var_epi / scale**2, var_alea / scale**2

    def incumbent(self, X_obs):
        mean_s, _, _ = self.stats(X_obs)
        return float(np.min(mean_s))


def _acq_on(surrogate, spec, Xq, eta):
    mean, var_epi, var_alea = surrogate.stats(Xq)
    return evaluate_acquisition(spec, mean, var_epi, var_alea, eta)


def propose(surrogate, spec, config, rng, X_obs, remaining=None):
    """Next query: exact argmax over unqueried candidates, or sampled
    uniform points refined by a shrinking coordinate search in a box.

    Returns ``(x, acq_value)`` in continuous mode and
    ``(index, acq_value)`` in candidate-set mode. Ties break to the first
    (lowest-index) point.
    """
    if spec.kind == "random":
        if remaining is not None:
            return int(rng.choice(remaining)), np.nan
        lo, hi = config.bounds[:, 0], config.bounds[:, 1]
        return rng.uniform(lo, hi), np.nan

    eta = surrogate.incumbent(X_obs)
    if remaining is not None:
        values = _acq_on(surrogate, spec, config.candidates[remaining], eta)
        k = int(np.argmax(values))
        return int(remaining[k]), float(values[k])

    lo, hi = config.bounds[:, 0], config.bounds[:, 1]
    pool = rng.uniform(lo, hi, size=(config.acq_samples, lo.size))
    values = _acq_on(surrogate, spec, pool, eta)
    order = np.argsort(-values, kind="stable")[: config.refine_top]
    pts = pool[order].copy()
    best = values[order].copy()
    step = 0.05 * (hi - lo) * np.ones_like(pts)
    for _ in range(config.refine_steps):
        improved = np.zeros(len(pts), dtype=bool)
        for k in range(lo.size):
            for sgn in (+1.0, -1.0):
                trial = pts.copy()
                trial[:, k] = np.clip(trial[:, k] + sgn * step[:, k], lo[k], hi[k])
                vals = _acq_on(surrogate, spec, trial, eta)
                gain = vals > best
                pts[gain] = trial[gain]
                best[gain] = vals[gain]
                improved |= gain
        step[~improved] *= 0.5
    k = int(np.argmax(best))
    return pts[k], float(best[k])


def run_bo(objective, config):
    """Run one seeded optimisation; returns the full :class:`BOTrace`."""
    ss = np.random.SeedSequence(config.seed)
    s_init, s_obs, s_acq, s_fit = ss.spawn(4)
    rng_init = np.random.default_rng(s_init)
    rng_obs = np.random.default_rng(s_obs)
    rng_acq = np.random.default_rng(s_acq)
    fit_seeds = list(s_fit.spawn(config.iterations + 1))

    tabular = isinstance(objective, TabularObjective)
    if tabular:
        objective.reset()
    sgn = -1.0 if objective.direction == "maximise" else 1.0
    candidates = config.candidates
    remaining = None if candidates is None else list(range(candidates.shape[0]))

    def observe(x=None, index=None):
        if tabular:
            if index is None:
                return objective.query_closest(x)
            return objective.query_index(index)
        if index is not None:
            x = candidates[index]
        y = objective.sample(x, rng_obs)
        f, g = objective.eval(x)
        return np.asarray(x, dtype=float).ravel(), y, f, g

    records = []

    def push(x, y, f, g, phase, acq, t0):
        h = config.alpha * sgn * f + (1.0 - config.alpha) * g
        prev_h = records[-1]["best_h"] if records else np.inf
        prev_g = records[-1]["lowest_g"] if records else np.inf
        records.append(
            dict(
                x=np.atleast_1d(x), y=y, f=f, g=g, phase=phase, acq=acq,
                best_h=min(prev_h, h), lowest_g=min(prev_g, g),
                ms=(time.perf_counter() - t0) * 1e3,
            )
        )

    # initial design
    for _ in range(config.init_size):
        t0 = time.perf_counter()
        if remaining is not None:
            idx = int(rng_init.choice(remaining))
            remaining.remove(idx)
            x, y, f, g = observe(index=idx)
        else:
            lo, hi = config.bounds[:, 0], config.bounds[:, 1]
            x, y, f, g = observe(x=rng_init.uniform(lo, hi))
        push(x, y, f, g, "init", np.nan, t0)

    surrogate = _Surrogate(config, fit_seeds)
    exhausted = False
    for _ in range(config.iterations):
        t0 = time.perf_counter()
        if remaining is not None and not remaining:
            exhausted = True
            break
        X_obs = np.vstack([r["x"] for r in records])
        y_int = sgn * np.array([r["y"] for r in records])
        if config.acquisition.kind != "random":
            try:
                surrogate.fit(X_obs, y_int)
            except Exception as exc:
                logger.warning("surrogate refit failed, reusing previous: %s", exc)
                if surrogate.model is None:
                    raise
        pick, acq = propose(
            surrogate, config.acquisition, config, rng_acq, X_obs,
            remaining=np.asarray(remaining) if remaining is not None else None,
        )
        if remaining is not None:
            remaining.remove(int(pick))
            x, y, f, g = observe(index=int(pick))
        else:
            x, y, f, g = observe(x=pick)
        push(x, y, f, g, "bo", acq, t0)

    return BOTrace(
        seed=config.seed,
        direction=objective.direction,
        x=np.vstack([r["x"] for r in records]),
        y=np.array([r["y"] for r in records]),
        f_true=np.array([r["f"] for r in records]),
        g_true=np.array([r["g"] for r in records]),
        best_h=np.array([r["best_h"] for r in records]),
        lowest_g=np.array([r["lowest_g"] for r in records]),
        acq_value=np.array([r["acq"] for r in records]),
        phase=[r["phase"] for r in records],
        wall_ms=np.array([r["ms"] for r in records]),
        exhausted=exhausted,
        config=config,
    )


def _resolve_objective(spec):
    if isinstance(spec, (SyntheticObjective, TabularObjective)):
        return spec
    kind = spec.get("kind", "synthetic")
    if kind == "synthetic":
        return make_objective(spec["name"], noise=spec.get("noise", "het"))
    if kind == "tabular":
        from .io import load_dataset

        ds = load_dataset(spec["path"])
        return TabularObjective(ds.X, ds.y, noise_std=ds.noise_std,
                                direction=spec.get("direction", "minimise"))
    raise InvalidInputError(f"unknown objective spec {spec!r}")


def _seed_worker(args):
    spec, config, seed = args
    return run_bo(_resolve_objective(spec), replace(config, seed=seed))


def _limit_worker_blas():
    # one BLAS thread per pool worker; nested threading only thrashes here
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(1)
    except ImportError:
        pass


def run_bo_seeds(objective_spec, config, seeds, max_workers=None):
    """Run one config across many seeds, fanning out over processes.

    ``objective_spec`` is either an objective instance (serial execution
    only) or a plain dict so workers can rebuild it. The worker count is
    capped by the HETGP_THREADS environment variable.
    """
    jobs = [(objective_spec, config, int(s)) for s in seeds]
    cap = os.environ.get("HETGP_THREADS")
    workers = max_workers if max_workers is not None else (os.cpu_count() or 1)
    if cap:
        workers = min(workers, max(1, int(cap)))
    if workers <= 1 or len(jobs) <= 1 or not isinstance(objective_spec, dict):
        return [_seed_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers, initializer=_limit_worker_blas) as pool:
        return list(pool.map(_seed_worker, jobs))
