"""Repeated train/test regression benchmarking."""

import numpy as np

from .exceptions import InvalidInputError
from .gp import GPRegressor
from .io import Dataset
from .kernels import ICM
from .metrics import regression_metrics
from .validation import n_inputs, take_inputs

__all__ = ["run_regression_benchmark"]


def _aggregate(reports, key):
    vals = np.array([getattr(r, key) for r in reports], dtype=float)
    finite = vals[np.isfinite(vals)]
    if finite.size == 0:
        return {"mean": float("inf"), "stderr": 0.0}
    se = float(finite.std(ddof=1) / np.sqrt(finite.size)) if finite.size > 1 else 0.0
    return {"mean": float(finite.mean()), "stderr": se}


def run_regression_benchmark(dataset, kernel, n_splits=20, split_ratio=0.8,
                             seed=0, n_restarts=20, jitter=1e-6):
    """Fit/predict/score over repeated random train/test splits.

    Returns a dict with per-metric mean and standard error over splits,
    plus a per-task breakdown when the dataset carries task indices.
    Predictive variances include the likelihood noise for the NLPD.
    """
    if not isinstance(dataset, Dataset):
        raise InvalidInputError("run_regression_benchmark expects a Dataset")
    n = n_inputs(dataset.X)
    if n < 5:
        raise InvalidInputError(f"insufficient data: {n} rows (need at least 5)")
    if dataset.tasks is not None and not isinstance(kernel, ICM):
        raise InvalidInputError("task-labelled data needs the icm kernel")

    ss = np.random.SeedSequence(seed)
    split_seeds = ss.spawn(n_splits)
    n_train = max(int(round(split_ratio * n)), 2)
    reports, per_task = [], {}

    for split_idx, child in enumerate(split_seeds):
        rng = np.random.default_rng(child)
        perm = rng.permutation(n)
        train, test = perm[:n_train], perm[n_train:]
        if test.size == 0:
            raise InvalidInputError("split ratio leaves no test rows")
        X_all = dataset.inputs
        gp = GPRegressor(
            kernel=kernel, n_restarts=n_restarts, jitter=jitter, random_state=child
        )
        gp.fit(take_inputs(X_all, train), dataset.y[train])
        mean, std = gp.predict(
            take_inputs(X_all, test), return_std=True, include_noise=True
        )
        report = regression_metrics(mean, std**2, dataset.y[test], seed=split_idx)
        reports.append(report)
        if dataset.tasks is not None:
            test_tasks = dataset.tasks[test]
            for t in np.unique(test_tasks):
                sel = test_tasks == t
                if sel.sum() < 2:
                    continue
                per_task.setdefault(int(t), []).append(
                    regression_metrics(mean[sel], std[sel] ** 2,
                                       dataset.y[test][sel], seed=split_idx)
                )

    out = {
        "n_splits": n_splits,
        "split_ratio": split_ratio,
        "seed": seed,
        "metrics": {k: _aggregate(reports, k) for k in ("rmse", "mae", "r2", "nlpd")},
    }
    if per_task:
        out["per_task"] = {
            str(t): {k: _aggregate(rs, k) for k in ("rmse", "mae", "r2", "nlpd")}
            for t, rs in sorted(per_task.items())
        }
    return out
