"""Most likely heteroscedastic GP.

Alternates between a latent-function GP and a log-noise GP: fit a
homoscedastic GP, estimate per-point noise levels from posterior samples,
fit a second GP to the log noise levels, then refit the latent GP with the
predicted noise variances on the covariance diagonal. The loop runs a fixed
number of iterations (optionally stopping early on a relative NLML change
tolerance).
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .exceptions import InvalidInputError
from .gp import GPRegressor
from .kernels import SquaredExponential
from .validation import check_targets, n_inputs

__all__ = ["MostLikelyHeteroscedasticGP", "empirical_noise_levels"]

_VAR_FLOOR = 1e-12  # sample variance estimates can hit zero at interpolated points


def empirical_noise_levels(model, X, y, sample_size=100, random_state=None,
                           noise_var_at=None):
    """Log per-point noise-variance estimates from posterior samples.

    For each training point, draws ``sample_size`` values from the model's
    predictive distribution of the observable (latent posterior plus
    observation noise) and returns
    ``z_i = log( mean_j 0.5 * (y_i - t_i^j)^2 )``, floored at 1e-12 before
    the log. The draws share one standard-normal stream across points, so
    the estimate is exactly equivariant under permuting the training set.

    Everything is computed in the model's own output units; ``noise_var_at``
    overrides the scalar likelihood noise with per-point variances (used for
    the combined GP whose noise lives on the covariance diagonal).
    """
    if sample_size < 2:
        raise InvalidInputError("sample_size must be >= 2")
    y = check_targets(y, n=n_inputs(X))
    mean, std_f = model.predict(X, return_std=True)
    var = std_f**2
    if noise_var_at is not None:
        var = var + np.asarray(noise_var_at, dtype=float)
    else:
        var = var + model.noise_variance_ * model.y_std_**2
    rng = np.random.default_rng(random_state)
    eps = rng.standard_normal(sample_size)
    sq = 0.5 * (y[None, :] - (mean[None, :] + np.sqrt(var)[None, :] * eps[:, None])) ** 2
    return np.log(np.maximum(sq.mean(axis=0), _VAR_FLOOR))


class MostLikelyHeteroscedasticGP(RegressorMixin, BaseEstimator):
    """Heteroscedastic GP regression via alternating noise estimation.

    Parameters
    ----------
    kernel : Kernel, optional
        Covariance for the latent-function GP (default squared exponential).
    noise_kernel : Kernel, optional
        Covariance for the log-noise GP (default squared exponential with
        unit lengthscale).
    max_iter : int
        Number of alternating iterations; 0 returns the plain homoscedastic
        fit flagged as degenerate.
    sample_size : int
        Draws per point for the noise-level estimator.
    tol : float, optional
        Relative NLML change below which the loop stops early; ``None``
        (default) always runs ``max_iter`` iterations.
    """

    def __init__(
        self,
        kernel=None,
        noise_kernel=None,
        max_iter=10,
        sample_size=100,
        n_restarts=20,
        tol=None,
        jitter=1e-6,
        ard=True,
        random_state=None,
    ):
        self.kernel = kernel
        self.noise_kernel = noise_kernel
        self.max_iter = max_iter
        self.sample_size = sample_size
        self.n_restarts = n_restarts
        self.tol = tol
        self.jitter = jitter
        self.ard = ard
        self.random_state = random_state

    def _make_gp(self, kernel, seed, n_restarts=None, **kw):
        opts = dict(
            kernel=kernel,
            n_restarts=self.n_restarts if n_restarts is None else n_restarts,
            jitter=self.jitter,
            ard=self.ard,
            random_state=seed,
        )
        opts.update(kw)
        return GPRegressor(**opts)

    def fit(self, X, y, initial_thetas=None):
        y = check_targets(y, n=n_inputs(X))
        std = float(np.std(y))
        if std <= 0:
            raise InvalidInputError("targets have zero variance; cannot standardise")
        self.y_mean_, self.y_std_ = float(np.mean(y)), std
        y_s = (y - self.y_mean_) / self.y_std_

        if isinstance(self.random_state, np.random.SeedSequence):
            ss = self.random_state
        else:
            ss = np.random.SeedSequence(
                self.random_state if self.random_state is not None else 0
            )
        seeds = ss.spawn(1 + 3 * max(self.max_iter, 0))
        # warm starts are kernel thetas; the homoscedastic GP packs in a noise entry
        warm = [np.append(t, np.log(1.0)) for t in (initial_thetas or [])]

        current = self._make_gp(self.kernel, seeds[0], noise_variance=1.0,
                                standardize=False)
        try:
            current.fit(X, y_s, initial_thetas=warm or None)
        except Exception as exc:
            exc.args = (f"homoscedastic fit failed at iteration 0: {exc}",)
            raise

        self.g_noise_ = None
        self.iterations_run_ = 0
        self.degenerate_ = self.max_iter == 0
        noise_at_train = None  # None -> homoscedastic scalar noise
        prev_nlml = current.nlml()

        g2_warm = None
        for it in range(self.max_iter):
            s_seed, g2_seed, g3_seed = seeds[1 + 3 * it : 4 + 3 * it]
            # hyperparameters change little between iterations once warm-started,
            # so later iterations run fewer fresh restarts
            restarts = self.n_restarts if it == 0 else max(1, self.n_restarts // 2)
            z = empirical_noise_levels(
                current, X, y_s,
                sample_size=self.sample_size,
                random_state=s_seed,
                noise_var_at=noise_at_train,
            )
            noise_kernel = (
                self.noise_kernel.clone()
                if self.noise_kernel is not None
                else SquaredExponential(lengthscales=1.0)
            )
            g2 = self._make_gp(
                noise_kernel, g2_seed,
                n_restarts=restarts,
                noise_variance=1.0,
                standardize=bool(np.std(z) > 0),
            )
            try:
                g2.fit(X, z, initial_thetas=[g2_warm] if g2_warm is not None else None)
                g2_warm = g2._packed_theta_
                r = np.exp(g2.predict(X))
                g3 = self._make_gp(self.kernel, g3_seed, n_restarts=restarts,
                                   noise_variance=0.0, fix_noise=True,
                                   standardize=False)
                g3.fit(
                    X, y_s,
                    per_point_noise_var=r,
                    initial_thetas=[current.kernel_.theta],
                )
            except Exception as exc:
                exc.args = (f"heteroscedastic fit failed at iteration {it + 1}: {exc}",)
                raise
            current, self.g_noise_ = g3, g2
            noise_at_train = r
            self.iterations_run_ = it + 1
            if self.tol is not None and prev_nlml != 0:
                if abs(g3.nlml() - prev_nlml) / abs(prev_nlml) < self.tol:
                    break
            prev_nlml = current.nlml()

        self.g_latent_ = current
        self.X_train_, self.y_train_ = X, y
        return self

    def _check_fitted(self):
        if not hasattr(self, "g_latent_"):
            raise NotFittedError("this MostLikelyHeteroscedasticGP is not fitted yet")

    def noise_variance(self, X):
        """Aleatoric noise variance r(x) at the given inputs (output units^2)."""
        self._check_fitted()
        if self.g_noise_ is None:
            return np.full(n_inputs(X), np.exp(0.0)) * self.y_std_**2
        return np.exp(self.g_noise_.predict(X)) * self.y_std_**2

    def predict_components(self, X):
        """(mean, epistemic variance, aleatoric variance), de-standardised.

        The epistemic and aleatoric parts sum to the full predictive
        variance of a noisy observation at each test point.
        """
        self._check_fitted()
        mean_s, std_s = self.g_latent_.predict(X, return_std=True)
        mean = mean_s * self.y_std_ + self.y_mean_
        var_epi = std_s**2 * self.y_std_**2
        return mean, var_epi, self.noise_variance(X)

    def predict(self, X, return_std=False, include_noise=True):
        """Posterior mean, optionally with the predictive standard deviation.

        ``include_noise`` folds the input-dependent aleatoric variance into
        the returned standard deviation.
        """
        mean, var_epi, var_alea = self.predict_components(X)
        if not return_std:
            return mean
        var = var_epi + (var_alea if include_noise else 0.0)
        return mean, np.sqrt(var)
