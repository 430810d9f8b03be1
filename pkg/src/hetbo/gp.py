"""Exact Gaussian-process regression.

The estimator standardises targets, optimises kernel hyperparameters (and
optionally the likelihood noise) by minimising the negative log marginal
likelihood with a bounded L-BFGS-B search over log-transformed parameters,
and caches the Cholesky factor for prediction and sampling. The constant
mean is the empirical mean of the standardised targets, i.e. zero.
"""

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .exceptions import InvalidInputError, NumericalError
from .kernels import ICM, SquaredExponential, StringNGram, _StationaryKernel
from .validation import check_targets, n_inputs

__all__ = ["GPRegressor", "stable_cholesky"]

_LOG10_RESTART_RANGE = (-2.0, 2.0)  # restart draws span [1e-2, 1e2]
_NOISE_BOUNDS = (np.log(1e-8), np.log(1e2))


def stable_cholesky(A, jitter=0.0, max_jitter=1e-3):
    """Lower Cholesky factor of ``A + j I``, escalating ``j`` tenfold.

    Starts at ``jitter`` (trying 0 first when ``jitter`` is 0) and gives up
    past ``max_jitter``. Returns ``(L, j_used)``.
    """
    n = A.shape[0]
    eye = np.eye(n)
    j = jitter
    while True:
        try:
            L = cholesky(A + j * eye, lower=True)
            return L, j
        except np.linalg.LinAlgError:
            if j >= max_jitter:
                raise
            j = max(j * 10.0, 1e-12 if jitter == 0.0 else jitter)


class GPRegressor(RegressorMixin, BaseEstimator):
    """Exact GP regression with NLML hyperparameter optimisation.

    Parameters
    ----------
    kernel : Kernel, optional
        Covariance function; defaults to a squared exponential. The given
        kernel is cloned, never mutated.
    noise_variance : float
        Initial (or fixed) likelihood noise variance, in standardised
        output units squared.
    fix_noise : bool
        Hold the noise variance constant during optimisation.
    n_restarts : int
        Number of optimiser starts. The first uses the kernel's own
        hyperparameter values; the rest draw positive parameters
        log-uniformly from [1e-2, 1e2].
    jitter : float
        Diagonal jitter added to the training covariance; escalated
        tenfold up to ``max_jitter`` on Cholesky failure.
    optimizer : {"lbfgsb", None}
        ``None`` skips the hyperparameter search and assembles the model
        at the supplied values.
    ard : bool
        Expand a scalar lengthscale to one per input dimension for
        real-vector inputs.
    standardize : bool
        Standardise targets to zero mean, unit variance before fitting.
        With ``False`` the targets are used as given (stats (0, 1)).
    random_state : int, Generator or None
        Seeds the restart draws.
    """

    def __init__(
        self,
        kernel=None,
        noise_variance=1.0,
        fix_noise=False,
        n_restarts=20,
        jitter=1e-6,
        max_jitter=1e-3,
        optimizer="lbfgsb",
        ard=True,
        standardize=True,
        random_state=None,
    ):
        self.kernel = kernel
        self.noise_variance = noise_variance
        self.fix_noise = fix_noise
        self.n_restarts = n_restarts
        self.jitter = jitter
        self.max_jitter = max_jitter
        self.optimizer = optimizer
        self.ard = ard
        self.standardize = standardize
        self.random_state = random_state

    # ------------------------------------------------------------------ fit

    def fit(self, X, y, per_point_noise_var=None, initial_thetas=None):
        """Fit on inputs of any supported kind.

        Parameters
        ----------
        per_point_noise_var : array, optional
            Known per-point noise variances (standardised units squared)
            added to the training covariance diagonal; not optimised.
        initial_thetas : list of arrays, optional
            Extra optimiser starts (packed hyperparameter vectors),
            tried before the regular restarts. Used for warm starts.
        """
        n = n_inputs(X)
        y = check_targets(y, n=n)
        if self.standardize:
            std = float(np.std(y))
            if std <= 0 or n < 2:
                raise InvalidInputError(
                    "targets have zero variance; cannot standardise"
                )
            self.y_mean_, self.y_std_ = float(np.mean(y)), std
        else:
            self.y_mean_, self.y_std_ = 0.0, 1.0
        y_s = (y - self.y_mean_) / self.y_std_

        kernel = self._setup_kernel(X)
        if per_point_noise_var is not None:
            per_point_noise_var = np.asarray(per_point_noise_var, dtype=float)
            if per_point_noise_var.shape != (n,) or np.any(per_point_noise_var < 0):
                raise InvalidInputError("per_point_noise_var must be length-n and >= 0")

        self.X_train_ = X
        self.y_train_ = y
        self._y_s = y_s
        self._R = per_point_noise_var
        self.kernel_ = kernel
        self._train_pre = kernel.precompute(X)

        if self.optimizer is None or self.n_restarts == 0:
            packed = self._pack(kernel.theta, self.noise_variance)
        else:
            packed = self._optimize(kernel, initial_thetas)
        self._assemble(packed)
        return self

    def _setup_kernel(self, X):
        kernel = self.kernel.clone() if self.kernel is not None else SquaredExponential()
        if isinstance(kernel, _StationaryKernel) and self.ard:
            if isinstance(X, np.ndarray) and X.ndim == 2 and X.shape[1] > 1:
                kernel.expand_ard(X.shape[1])
        base = kernel.base if isinstance(kernel, ICM) else kernel
        if isinstance(base, StringNGram) and base.vocabulary_ is None:
            strings = X[0] if isinstance(X, tuple) else X
            base.freeze_vocabulary(strings)
        return kernel

    def _pack(self, kernel_theta, noise_variance):
        if self.fix_noise:
            return np.asarray(kernel_theta, dtype=float)
        return np.concatenate((kernel_theta, [np.log(max(noise_variance, 1e-12))]))

    def _unpack(self, packed):
        if self.fix_noise:
            return packed, self.noise_variance
        return packed[:-1], float(np.exp(packed[-1]))

    def _raw_mask(self, kernel):
        mask = getattr(kernel, "raw_theta_mask", None)
        if mask is None:
            mask = np.zeros(kernel.theta.size, dtype=bool)
        if not self.fix_noise:
            mask = np.append(mask, False)
        return mask

    def _initial_points(self, kernel, rng, extra):
        points = [np.asarray(t, dtype=float) for t in (extra or [])]
        default = self._pack(kernel.theta, self.noise_variance)
        raw = self._raw_mask(kernel)
        if isinstance(kernel, ICM) and np.allclose(kernel.L, np.eye(kernel.n_tasks)):
            # break the symmetric start before optimisation
            base_n = kernel.base.theta.size
            tril = 0.5 * np.eye(kernel.n_tasks)[np.tril_indices(kernel.n_tasks)]
            default = default.copy()
            default[base_n : base_n + tril.size] = tril + 0.01 * rng.normal(size=tril.size)
        points.append(default)
        lo, hi = _LOG10_RESTART_RANGE
        for _ in range(max(self.n_restarts - 1, 0)):
            draw = np.where(
                raw,
                default + 0.1 * rng.normal(size=default.size),
                np.log(10.0) * rng.uniform(lo, hi, size=default.size),
            )
            points.append(draw)
        return points

    def _bounds(self, kernel):
        bounds = list(kernel.theta_bounds)
        if not self.fix_noise:
            bounds.append(_NOISE_BOUNDS)
        return bounds

    def _optimize(self, kernel, extra_inits):
        rng = np.random.default_rng(self.random_state)
        bounds = self._bounds(kernel)
        best = (np.inf, None)
        for x0 in self._initial_points(kernel, rng, extra_inits):
            x0 = np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds])
            res = minimize(
                self._nlml_and_grad,
                x0,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
            )
            if res.fun < best[0]:
                best = (res.fun, res.x)
        if best[1] is None:
            raise NumericalError("hyperparameter optimisation found no valid point")
        return best[1]

    # ------------------------------------------------------- nlml machinery

    def _covariance(self, packed, eval_gradient=False):
        theta, noise = self._unpack(packed)
        kernel = self.kernel_.clone_with_theta(theta)
        pre = getattr(self, "_train_pre", None)
        if eval_gradient:
            K, G = kernel(self.X_train_, eval_gradient=True, precomputed=pre)
        else:
            K, G = kernel(self.X_train_, precomputed=pre), None
        Kt = K + (noise + self.jitter) * np.eye(K.shape[0])
        if self._R is not None:
            Kt[np.diag_indices_from(Kt)] += self._R
        return kernel, noise, Kt, G

    def _nlml_and_grad(self, packed):
        _, noise, Kt, G = self._covariance(packed, eval_gradient=True)
        y = self._y_s
        n = y.size
        try:
            L = cholesky(Kt, lower=True)
        except np.linalg.LinAlgError:
            return 1e25, np.zeros_like(packed)
        alpha = cho_solve((L, True), y)
        nlml = (
            0.5 * float(y @ alpha)
            + float(np.sum(np.log(np.diag(L))))
            + 0.5 * n * np.log(2.0 * np.pi)
        )
        Kinv = cho_solve((L, True), np.eye(n))
        W = Kinv - np.outer(alpha, alpha)
        grad = 0.5 * np.einsum("ij,kij->k", W, G)
        if not self.fix_noise:
            grad = np.append(grad, 0.5 * noise * np.trace(W))
        return nlml, grad

    def _assemble(self, packed):
        kernel, noise, Kt, _ = self._covariance(packed)
        try:
            L, j_used = stable_cholesky(
                Kt - self.jitter * np.eye(Kt.shape[0]),
                jitter=self.jitter,
                max_jitter=self.max_jitter,
            )
        except np.linalg.LinAlgError:
            cond = np.linalg.cond(Kt)
            raise NumericalError(
                f"cholesky factorisation failed for kernel {kernel.tag!r} after "
                f"jitter escalation to {self.max_jitter:g} "
                f"(condition estimate {cond:.3e})"
            ) from None
        self.kernel_ = kernel
        self.noise_variance_ = noise
        self.jitter_ = j_used
        self.L_ = L
        self.alpha_ = cho_solve((L, True), self._y_s)
        self._packed_theta_ = packed
        self.nlml_ = (
            0.5 * float(self._y_s @ self.alpha_)
            + float(np.sum(np.log(np.diag(L))))
            + 0.5 * self._y_s.size * np.log(2.0 * np.pi)
        )

    def _check_fitted(self):
        if not hasattr(self, "alpha_"):
            raise NotFittedError("this GPRegressor instance is not fitted yet")

    # ---------------------------------------------------------------- query

    def nlml(self):
        """Negative log marginal likelihood at the fitted hyperparameters."""
        self._check_fitted()
        return self.nlml_

    def nlml_gradient(self):
        """Gradient of the NLML with respect to the packed log-hyperparameters."""
        self._check_fitted()
        return self._nlml_and_grad(self._packed_theta_)[1]

    def predict(self, X, return_std=False, return_cov=False, include_noise=False):
        """Posterior mean (de-standardised), optionally with std or covariance.

        ``include_noise`` adds the likelihood noise variance to the
        variances (not to covariances across points).
        """
        self._check_fitted()
        if return_std and return_cov:
            raise InvalidInputError("at most one of return_std/return_cov")
        K_star = self.kernel_(X, self.X_train_)
        mean = K_star @ self.alpha_ * self.y_std_ + self.y_mean_
        if not (return_std or return_cov):
            return mean
        V = solve_triangular(self.L_, K_star.T, lower=True)
        if return_cov:
            cov = self.kernel_(X) - V.T @ V
            if include_noise:
                cov[np.diag_indices_from(cov)] += self.noise_variance_
            return mean, cov * self.y_std_**2
        var = self.kernel_.diag(X) - np.einsum("ij,ij->j", V, V)
        var = np.clip(var, 0.0, None)
        if include_noise:
            var = var + self.noise_variance_
        return mean, np.sqrt(var) * self.y_std_

    def sample_y(self, X, n_samples=1, random_state=None, include_noise=False):
        """Joint posterior draws, (n_samples, n_test); deterministic per seed."""
        self._check_fitted()
        if n_samples < 1:
            raise InvalidInputError("n_samples must be >= 1")
        mean, cov = self.predict(X, return_cov=True, include_noise=include_noise)
        try:
            Lc, _ = stable_cholesky(cov, jitter=0.0, max_jitter=1e-3 * max(self.y_std_**2, 1.0))
        except np.linalg.LinAlgError:
            raise NumericalError(
                "predictive covariance not positive definite after jitter escalation"
            ) from None
        rng = np.random.default_rng(random_state)
        z = rng.standard_normal((n_samples, mean.size))
        return mean[None, :] + z @ Lc.T
