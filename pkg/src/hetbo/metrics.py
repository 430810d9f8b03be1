"""Regression metrics, including the uncertainty-aware NLPD."""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from sklearn.metrics import r2_score

from .exceptions import InvalidInputError

__all__ = ["MetricsReport", "regression_metrics"]


@dataclass
class MetricsReport:
    rmse: float
    mae: float
    r2: float
    nlpd: float
    n_test: int
    seed: Optional[int] = None
    nlpd_infinite: bool = False

    def to_dict(self):
        return asdict(self)


def regression_metrics(mean, variance, truth, seed=None):
    """RMSE, MAE, R^2 and negative log predictive density.

    NLPD averages -log N(t_i | mean_i, variance_i); the variances should
    include observation noise. Zero or negative variances yield an
    infinite NLPD with ``nlpd_infinite`` set instead of an exception.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    variance = np.asarray(variance, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if not (mean.size == variance.size == truth.size):
        raise InvalidInputError("mean, variance and truth must have equal length")
    resid = truth - mean
    rmse = float(np.sqrt(np.mean(resid**2)))
    mae = float(np.mean(np.abs(resid)))
    r2 = float(r2_score(truth, mean)) if truth.size > 1 else float("nan")
    if np.any(variance <= 0):
        nlpd, flag = float("inf"), True
    else:
        nlpd = float(
            np.mean(0.5 * np.log(2.0 * np.pi * variance) + resid**2 / (2.0 * variance))
        )
        flag = False
    return MetricsReport(
        rmse=rmse, mae=mae, r2=r2, nlpd=nlpd, n_test=truth.size,
        seed=seed, nlpd_infinite=flag,
    )
