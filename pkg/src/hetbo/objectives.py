"""Benchmark objectives with controllable observation noise.

Each synthetic task pairs a latent function f with a noise-scale function
g; observations are y = f(x) + g(x) * eps with standard-normal eps. The
noise mode swaps g for zero ("off") or a constant ("homo:<sigma>") to
support ablations. Tabular objectives serve recorded datasets row by row,
mapping queries to the closest unqueried datapoint.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import InvalidInputError
from .gp import GPRegressor
from .validation import check_real_matrix

__all__ = [
    "SyntheticObjective",
    "TabularObjective",
    "make_objective",
    "eval_objective",
    "sample_noisy",
    "smoothed_noise_oracle",
    "gaussian_smooth",
    "OBJECTIVE_NAMES",
]


@dataclass
class SyntheticObjective:
    """Latent function, noise-scale function and their common domain."""

    name: str
    f: Callable
    g: Callable
    bounds: np.ndarray  # (d, 2)
    direction: str = "minimise"
    known_optimum: Optional[float] = None

    def __post_init__(self):
        self.bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))

    @property
    def dim(self):
        return self.bounds.shape[0]

    def _check(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise InvalidInputError(f"{self.name} expects {self.dim}-d inputs")
        if np.any(x < self.bounds[:, 0]) or np.any(x > self.bounds[:, 1]):
            raise InvalidInputError(f"input {x} outside the {self.name} domain")
        return x

    def eval(self, x):
        """(f(x), g(x)) without noise."""
        x = self._check(x)
        return float(self.f(x)), float(self.g(x))

    def sample(self, x, rng):
        """One noisy observation y = f(x) + g(x) * eps."""
        f, g = self.eval(x)
        return f + g * float(rng.standard_normal())


def _sin_f(x):
    return np.sin(x[0]) + 0.2 * x[0] + 3.0


def _sin_g(x):
    return 0.5 * x[0]


def _branin_f(x):
    x1b = 15.0 * x[0] - 5.0
    x2b = 15.0 * x[1]
    return (
        (x2b - 5.1 * x1b**2 / (4.0 * np.pi**2) + 5.0 * x1b / np.pi - 6.0) ** 2
        + (10.0 - 10.0 / (8.0 * np.pi)) * np.cos(x1b)
        - 44.81
    ) / 51.95


def _branin_g(x):
    return 15.0 - 8.0 * x[0] + 8.0 * x[1] ** 2


# published standardisation constants for the Hosaki task
_HOSAKI_MEAN, _HOSAKI_STD = 0.817, 0.573


def _hosaki_f(x):
    x1, x2 = x
    raw = (
        (1.0 - 8.0 * x1 + 7.0 * x1**2 - (7.0 / 3.0) * x1**3 + 0.25 * x1**4)
        * x2**2
        * np.exp(-x2)
    )
    return (raw - _HOSAKI_MEAN) / _HOSAKI_STD


def _hosaki_g(x):
    return 50.0 / ((x[0] - 3.5) ** 2 + 2.5) / ((x[1] - 2.0) ** 2 + 2.5)


def _gprice_f(x):
    x1b = 4.0 * x[0] - 2.0
    x2b = 4.0 * x[1] - 2.0
    a = 1.0 + (x1b + x2b + 1.0) ** 2 * (
        19.0 - 14.0 * x1b + 3.0 * x1b**2 - 14.0 * x2b + 6.0 * x1b * x2b + 3.0 * x2b**2
    )
    b = 30.0 + (2.0 * x1b - 3.0 * x2b) ** 2 * (
        18.0 - 32.0 * x1b + 12.0 * x1b**2 + 48.0 * x2b - 36.0 * x1b * x2b + 27.0 * x2b**2
    )
    return (np.log(a * b) - 8.693) / 2.427


def _gprice_g(x):
    return 1.5 / ((x[0] - 0.5) ** 2 + 0.2) / ((x[1] - 0.3) ** 2 + 0.3)


_TASKS = {
    "sin-het": dict(f=_sin_f, g=_sin_g, bounds=[[0.0, 10.0]], direction="maximise"),
    "branin-het": dict(f=_branin_f, g=_branin_g, bounds=[[0.0, 1.0], [0.0, 1.0]]),
    "hosaki-het": dict(f=_hosaki_f, g=_hosaki_g, bounds=[[0.0, 5.0], [0.0, 5.0]]),
    "gprice-het": dict(f=_gprice_f, g=_gprice_g, bounds=[[0.0, 1.0], [0.0, 1.0]]),
}

OBJECTIVE_NAMES = tuple(_TASKS)


def make_objective(name, noise="het"):
    """Build a named benchmark task with the requested noise mode.

    ``noise`` is one of ``"het"`` (the task's own noise-scale function),
    ``"off"``, or ``"homo:<sigma>"`` for constant noise.
    """
    if name not in _TASKS:
        raise InvalidInputError(f"unknown objective {name!r}; choose from {OBJECTIVE_NAMES}")
    spec = dict(_TASKS[name])
    if noise == "het":
        pass
    elif noise == "off":
        spec["g"] = lambda x: 0.0
    elif isinstance(noise, str) and noise.startswith("homo:"):
        sigma = float(noise.split(":", 1)[1])
        if sigma < 0:
            raise InvalidInputError("homoscedastic noise level must be >= 0")
        spec["g"] = lambda x, s=sigma: s
    else:
        raise InvalidInputError(f"unknown noise mode {noise!r}")
    return SyntheticObjective(name=name, **spec)


def eval_objective(name, x):
    """(f, g) of a named task at ``x``; errors outside the domain."""
    return make_objective(name).eval(x)


def sample_noisy(objective, x, seed):
    """Seeded noisy draw y = f(x) + g(x) * eps."""
    return objective.sample(x, np.random.default_rng(seed))


@dataclass
class TabularObjective:
    """Dataset-backed objective; each row can be observed exactly once.

    Queries are mapped to the closest unqueried row by Euclidean distance
    on standardised features. The recorded target doubles as the latent
    value f; the optional noise column provides the ground-truth noise
    magnitude g.
    """

    features: np.ndarray
    targets: np.ndarray
    noise_std: Optional[np.ndarray] = None
    direction: str = "minimise"
    queried_: np.ndarray = field(init=False)

    def __post_init__(self):
        self.features = check_real_matrix(self.features, name="features")
        self.targets = np.asarray(self.targets, dtype=float).ravel()
        if self.targets.size != self.features.shape[0]:
            raise InvalidInputError("features and targets length mismatch")
        if self.noise_std is not None:
            self.noise_std = np.asarray(self.noise_std, dtype=float).ravel()
            if self.noise_std.size != self.targets.size:
                raise InvalidInputError("noise_std length mismatch")
        mu = self.features.mean(axis=0)
        sd = self.features.std(axis=0)
        sd[sd == 0] = 1.0
        self._scaled = (self.features - mu) / sd
        self._mu, self._sd = mu, sd
        self.queried_ = np.zeros(self.targets.size, dtype=bool)

    @property
    def n_remaining(self):
        return int((~self.queried_).sum())

    def remaining_indices(self):
        return np.flatnonzero(~self.queried_)

    def query_index(self, i):
        """Observe row ``i``; returns (x, y, f, g)."""
        if self.queried_[i]:
            raise InvalidInputError(f"row {i} already queried")
        self.queried_[i] = True
        g = float(self.noise_std[i]) if self.noise_std is not None else np.nan
        y = float(self.targets[i])
        return self.features[i], y, y, g

    def query_closest(self, x):
        """Observe the closest unqueried row to ``x``."""
        if self.n_remaining == 0:
            raise InvalidInputError("all rows already queried")
        xs = (np.asarray(x, dtype=float).ravel() - self._mu) / self._sd
        idx = self.remaining_indices()
        d2 = np.sum((self._scaled[idx] - xs) ** 2, axis=1)
        return self.query_index(idx[int(np.argmin(d2))])

    def reset(self):
        self.queried_[:] = False


def gaussian_smooth(X, values, bandwidth):
    """Gaussian-kernel weighted moving average of ``values`` over inputs.

    Weights w_ij = exp(-||x_i - x_j||^2 / (2 h^2)) are normalised to sum
    to one for each point i.
    """
    if bandwidth <= 0:
        raise InvalidInputError("bandwidth must be positive")
    X = check_real_matrix(X)
    values = np.asarray(values, dtype=float).ravel()
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    W = np.exp(-0.5 * d2 / bandwidth**2)
    return (W @ values) / W.sum(axis=1)


def smoothed_noise_oracle(X, y, bandwidth, kernel=None, n_restarts=10,
                          random_state=None):
    """Pseudo ground-truth noise variances for a recorded dataset.

    Fits a homoscedastic GP to the full data, squares the residuals at the
    training inputs, and smooths them with a Gaussian kernel of the given
    bandwidth. Returns one variance per datapoint.
    """
    gp = GPRegressor(kernel=kernel, n_restarts=n_restarts, random_state=random_state)
    gp.fit(X, y)
    residuals_sq = (np.asarray(y, dtype=float).ravel() - gp.predict(X)) ** 2
    return gaussian_smooth(X, residuals_sq, bandwidth)
