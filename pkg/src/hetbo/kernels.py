"""Covariance functions.

Continuous families (squared exponential, the three closed-form Matern
orders, rational quadratic) operate on real feature matrices; the
fingerprint kernels (Tanimoto, scalar product) on non-negative count/bit
matrices; the n-gram string kernel on raw strings; and the intrinsic
coregionalisation wrapper on (inputs, task-index) pairs.

Every kernel exposes ``theta``, a vector in optimiser space: positive
hyperparameters are log-transformed, the coregionalisation factor entries
stay raw. ``__call__(X, Y, eval_gradient=True)`` returns the kernel matrix
together with its gradient stack with respect to ``theta``.
"""

from collections import Counter

import numpy as np

from .exceptions import InvalidInputError
from .validation import (
    check_count_matrix,
    check_real_matrix,
    check_strings,
    check_tasked,
)

__all__ = [
    "SquaredExponential",
    "Matern12",
    "Matern32",
    "Matern52",
    "RationalQuadratic",
    "Tanimoto",
    "ScalarProduct",
    "StringNGram",
    "ICM",
    "ngram_counts",
    "kernel_from_dict",
    "KERNEL_TAGS",
]

# optimiser-space bounds for log-transformed positive hyperparameters
_LOG_BOUNDS = (np.log(1e-5), np.log(1e5))


def _symmetrize(K):
    # exact symmetry from the lower triangle
    L = np.tril(K)
    return L + np.tril(K, -1).T


class Kernel:
    """Base class; subclasses define ``tag`` and the evaluation methods."""

    tag = None

    def __call__(self, X, Y=None, eval_gradient=False, precomputed=None):
        raise NotImplementedError

    def precompute(self, X):
        """Hyperparameter-independent work for repeated K(X, X) evaluation.

        The returned object may be passed back via ``precomputed``; kernels
        without a fast path return None.
        """
        return None

    def diag(self, X):
        raise NotImplementedError

    @property
    def theta(self):
        raise NotImplementedError

    @theta.setter
    def theta(self, value):
        raise NotImplementedError

    @property
    def theta_bounds(self):
        raise NotImplementedError

    def clone_with_theta(self, theta):
        new = self.clone()
        new.theta = np.asarray(theta, dtype=float)
        return new

    def clone(self):
        raise NotImplementedError

    def pair(self, a, b):
        """Kernel value for a single input pair."""
        return float(self(self._wrap(a), self._wrap(b))[0, 0])

    @staticmethod
    def _wrap(a):
        if isinstance(a, str):
            return [a]
        if isinstance(a, tuple):
            base, task = a
            wrapped = Kernel._wrap(base)
            return (wrapped, np.atleast_1d(task))
        return np.atleast_2d(np.asarray(a, dtype=float))

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.to_dict().items() if k != "family")
        return f"{type(self).__name__}({params})"


class _StationaryKernel(Kernel):
    """Shared machinery for kernels depending only on scaled distances.

    ``lengthscales`` may be a scalar (isotropic) or a length-d vector
    (one lengthscale per input dimension).
    """

    def __init__(self, signal_variance=1.0, lengthscales=1.0):
        if signal_variance <= 0:
            raise InvalidInputError("signal_variance must be positive")
        self.signal_variance = float(signal_variance)
        ls = np.asarray(lengthscales, dtype=float)
        if np.any(ls <= 0):
            raise InvalidInputError("lengthscales must be positive")
        self.lengthscales = float(ls) if ls.ndim == 0 else ls.copy()

    @property
    def ard(self):
        return np.ndim(self.lengthscales) > 0

    def expand_ard(self, d):
        """Promote a scalar lengthscale to one per dimension (in place)."""
        if not self.ard:
            self.lengthscales = np.full(d, float(self.lengthscales))

    def precompute(self, X):
        X = check_real_matrix(X)
        diffs = X[:, None, :] - X[None, :, :]
        return diffs**2  # per-dim squared differences, theta-independent

    def _scaled_sqdists(self, X, Y, per_dim=False, precomputed=None):
        """s[i,j] = sum_k (x_ik - y_jk)^2 / l_k^2, optionally per-dim terms.

        Entries are computed elementwise from symmetric squared
        differences, so K(X, X) and its gradients come out exactly
        symmetric without a symmetrisation pass.
        """
        if precomputed is not None:
            sq = precomputed
            d = sq.shape[-1]
        else:
            X = check_real_matrix(X)
            Y = X if Y is None else check_real_matrix(Y, name="Y")
            if X.shape[1] != Y.shape[1]:
                raise InvalidInputError(
                    f"input dimension mismatch: {X.shape[1]} vs {Y.shape[1]}"
                )
            d = X.shape[1]
            sq = (X[:, None, :] - Y[None, :, :]) ** 2
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if ls.size not in (1, d):
            raise InvalidInputError(
                f"kernel has {ls.size} lengthscales but inputs have dimension {d}"
            )
        inv = np.broadcast_to(1.0 / ls**2, (d,))
        if per_dim:
            D = sq * inv
            return D.sum(axis=-1), D
        return sq @ inv

    # subclasses: value from s, and the per-dim gradient coefficient
    def _value(self, s):
        raise NotImplementedError

    def _lengthscale_coeff(self, s):
        """c(s) such that dK/dlog l_k = c(s) * D_k."""
        raise NotImplementedError

    def __call__(self, X, Y=None, eval_gradient=False, precomputed=None):
        if not eval_gradient:
            return self._value(self._scaled_sqdists(X, Y, precomputed=precomputed))
        s, D = self._scaled_sqdists(X, Y, per_dim=True, precomputed=precomputed)
        K = self._value(s)
        coeff = self._lengthscale_coeff(s)
        grads = [K.copy()]  # d/dlog sigma_f^2
        if self.ard:
            for k in range(D.shape[-1]):
                grads.append(coeff * D[..., k])
        else:
            grads.append(coeff * s)
        grads.extend(self._extra_gradients(s, K))
        return K, np.stack(grads, axis=0)

    def _extra_gradients(self, s, K):
        return []

    def diag(self, X):
        X = check_real_matrix(X)
        return np.full(X.shape[0], self.signal_variance)

    @property
    def theta(self):
        ls = np.atleast_1d(self.lengthscales)
        return np.log(np.concatenate(([self.signal_variance], ls)))

    @theta.setter
    def theta(self, value):
        value = np.exp(np.asarray(value, dtype=float))
        self.signal_variance = float(value[0])
        self.lengthscales = value[1:] if self.ard else float(value[1])

    @property
    def theta_bounds(self):
        return [_LOG_BOUNDS] * self.theta.size

    def clone(self):
        return type(self)(self.signal_variance, np.copy(self.lengthscales))

    def to_dict(self):
        ls = self.lengthscales
        return {
            "family": self.tag,
            "signal_variance": self.signal_variance,
            "lengthscales": ls.tolist() if self.ard else ls,
        }


class SquaredExponential(_StationaryKernel):
    tag = "sqe"

    def _value(self, s):
        return self.signal_variance * np.exp(-0.5 * s)

    def _lengthscale_coeff(self, s):
        return self._value(s)


class Matern12(_StationaryKernel):
    """Exponential kernel (Matern with smoothness 1/2)."""

    tag = "matern12"

    def _value(self, s):
        return self.signal_variance * np.exp(-np.sqrt(s))

    def _lengthscale_coeff(self, s):
        r = np.sqrt(s)
        K = self.signal_variance * np.exp(-r)
        # limit of K / r as r -> 0 is irrelevant: the multiplying D_k is 0 there
        return np.divide(K, r, out=np.zeros_like(K), where=r > 0)


class Matern32(_StationaryKernel):
    tag = "matern32"

    def _value(self, s):
        r3 = np.sqrt(3.0 * s)
        return self.signal_variance * (1.0 + r3) * np.exp(-r3)

    def _lengthscale_coeff(self, s):
        return 3.0 * self.signal_variance * np.exp(-np.sqrt(3.0 * s))


class Matern52(_StationaryKernel):
    tag = "matern52"

    def _value(self, s):
        r5 = np.sqrt(5.0 * s)
        return self.signal_variance * (1.0 + r5 + r5**2 / 3.0) * np.exp(-r5)

    def _lengthscale_coeff(self, s):
        r5 = np.sqrt(5.0 * s)
        return self.signal_variance * (5.0 / 3.0) * (1.0 + r5) * np.exp(-r5)


class RationalQuadratic(_StationaryKernel):
    """Scale mixture of squared exponentials; recovers SQE as alpha -> inf."""

    tag = "rq"

    def __init__(self, signal_variance=1.0, lengthscales=1.0, alpha=1.0):
        super().__init__(signal_variance, lengthscales)
        if alpha <= 0:
            raise InvalidInputError("alpha must be positive")
        self.alpha = float(alpha)

    def _value(self, s):
        return self.signal_variance * (1.0 + s / (2.0 * self.alpha)) ** (-self.alpha)

    def _lengthscale_coeff(self, s):
        return self.signal_variance * (1.0 + s / (2.0 * self.alpha)) ** (-self.alpha - 1.0)

    def _extra_gradients(self, s, K):
        u = s / (2.0 * self.alpha)
        dlog = u / (1.0 + u) - np.log1p(u)
        return [self.alpha * K * dlog]

    @property
    def theta(self):
        return np.concatenate((super().theta, [np.log(self.alpha)]))

    @theta.setter
    def theta(self, value):
        value = np.asarray(value, dtype=float)
        _StationaryKernel.theta.fset(self, value[:-1])
        self.alpha = float(np.exp(value[-1]))

    def clone(self):
        return RationalQuadratic(self.signal_variance, np.copy(self.lengthscales), self.alpha)

    def to_dict(self):
        d = super().to_dict()
        d["alpha"] = self.alpha
        return d


class _DotProductKernel(Kernel):
    """Base for kernels of the form sigma_f^2 * similarity(a, b)."""

    def __init__(self, signal_variance=1.0):
        if signal_variance <= 0:
            raise InvalidInputError("signal_variance must be positive")
        self.signal_variance = float(signal_variance)

    @property
    def theta(self):
        return np.array([np.log(self.signal_variance)])

    @theta.setter
    def theta(self, value):
        self.signal_variance = float(np.exp(np.asarray(value, dtype=float)[0]))

    @property
    def theta_bounds(self):
        return [_LOG_BOUNDS]

    def precompute(self, X):
        return _symmetrize(self._similarity(X, None))

    def __call__(self, X, Y=None, eval_gradient=False, precomputed=None):
        same = Y is None
        if precomputed is not None:
            K = self.signal_variance * precomputed
        else:
            K = self.signal_variance * self._similarity(X, Y)
            if same:
                K = _symmetrize(K)
        if eval_gradient:
            return K, K[None, ...].copy()
        return K

    def _similarity(self, X, Y):
        raise NotImplementedError

    def clone(self):
        return type(self)(self.signal_variance)

    def to_dict(self):
        return {"family": self.tag, "signal_variance": self.signal_variance}


class ScalarProduct(_DotProductKernel):
    """Linear kernel on fingerprint vectors."""

    tag = "scalar_product"

    def _similarity(self, X, Y):
        X = check_count_matrix(X)
        Y = X if Y is None else check_count_matrix(Y, name="Y")
        return X @ Y.T

    def diag(self, X):
        X = check_count_matrix(X)
        return self.signal_variance * np.einsum("ij,ij->i", X, X)


class Tanimoto(_DotProductKernel):
    """Jaccard-style similarity <a,b> / (|a|^2 + |b|^2 - <a,b>).

    Defined for non-negative bit or count vectors; a pair of all-zero
    vectors has an undefined similarity and is rejected.
    """

    tag = "tanimoto"

    def _similarity(self, X, Y):
        X = check_count_matrix(X)
        Y = X if Y is None else check_count_matrix(Y, name="Y")
        inner = X @ Y.T
        sq_x = np.einsum("ij,ij->i", X, X)
        sq_y = np.einsum("ij,ij->i", Y, Y)
        denom = sq_x[:, None] + sq_y[None, :] - inner
        if np.any(denom <= 0):
            i, j = np.argwhere(denom <= 0)[0]
            raise InvalidInputError(
                f"tanimoto similarity undefined for all-zero vector pair ({i}, {j})"
            )
        return inner / denom

    def diag(self, X):
        X = check_count_matrix(X)
        if np.any(np.einsum("ij,ij->i", X, X) == 0):
            raise InvalidInputError("tanimoto similarity undefined for all-zero vector")
        return np.full(X.shape[0], self.signal_variance)


def ngram_counts(s, n):
    """Counts of all contiguous substrings of length 1..n of ``s``."""
    if n < 1:
        raise InvalidInputError("ngram order must be >= 1")
    counts = Counter()
    for length in range(1, n + 1):
        for i in range(len(s) - length + 1):
            counts[s[i : i + length]] += 1
    return counts


class StringNGram(_DotProductKernel):
    """Bag-of-substrings kernel: sigma_f^2 * <phi(S), phi(S')>.

    ``phi`` counts contiguous substrings up to length ``n``. The vocabulary
    is frozen when fitted on a training set; substrings unseen at fit time
    contribute zero. Before freezing, the count dot product runs over all
    substrings of the evaluated pair.
    """

    tag = "string_ngram"

    def __init__(self, signal_variance=1.0, n=5):
        super().__init__(signal_variance)
        if int(n) < 1:
            raise InvalidInputError("ngram order must be >= 1")
        self.n = int(n)
        self.vocabulary_ = None

    def freeze_vocabulary(self, strings):
        strings = check_strings(strings)
        vocab = set()
        for s in strings:
            vocab.update(ngram_counts(s, self.n))
        self.vocabulary_ = {g: i for i, g in enumerate(sorted(vocab))}
        return self

    def featurize(self, strings):
        """Count matrix over the frozen vocabulary."""
        strings = check_strings(strings)
        if self.vocabulary_ is None:
            raise InvalidInputError("string kernel vocabulary not frozen yet")
        F = np.zeros((len(strings), len(self.vocabulary_)))
        for row, s in enumerate(strings):
            for gram, c in ngram_counts(s, self.n).items():
                col = self.vocabulary_.get(gram)
                if col is not None:
                    F[row, col] = c
        return F

    def _similarity(self, X, Y):
        X = check_strings(X)
        Y = X if Y is None else check_strings(Y, name="Y")
        if self.vocabulary_ is not None:
            return self.featurize(X) @ self.featurize(Y).T
        S = np.zeros((len(X), len(Y)))
        counts_y = [ngram_counts(s, self.n) for s in Y]
        for i, s in enumerate(X):
            ci = ngram_counts(s, self.n)
            for j, cj in enumerate(counts_y):
                small, big = (ci, cj) if len(ci) <= len(cj) else (cj, ci)
                S[i, j] = sum(c * big.get(g, 0) for g, c in small.items())
        return S

    def diag(self, X):
        return np.diag(self(X))

    def clone(self):
        new = StringNGram(self.signal_variance, self.n)
        new.vocabulary_ = self.vocabulary_
        return new

    def to_dict(self):
        return {
            "family": self.tag,
            "signal_variance": self.signal_variance,
            "ngram_order": self.n,
        }


class ICM(Kernel):
    """Intrinsic coregionalisation wrapper for multitask inputs.

    ``k((x, i), (x', j)) = base(x, x') * B[i, j]`` with ``B = L L^T``
    parametrised by a lower-triangular factor ``L`` whose entries are
    optimised alongside the base kernel hyperparameters. Inputs are
    ``(base_inputs, task_indices)`` pairs.
    """

    tag = "icm"

    def __init__(self, base, n_tasks, L=None):
        self.base = base
        self.n_tasks = int(n_tasks)
        if self.n_tasks < 1:
            raise InvalidInputError("n_tasks must be >= 1")
        if L is None:
            L = np.eye(self.n_tasks)
        self.L = np.tril(np.asarray(L, dtype=float))
        if self.L.shape != (self.n_tasks, self.n_tasks):
            raise InvalidInputError(
                f"L must be {self.n_tasks}x{self.n_tasks}, got {self.L.shape}"
            )

    @property
    def B(self):
        return _symmetrize(self.L @ self.L.T)

    def _tril_indices(self):
        return np.tril_indices(self.n_tasks)

    def precompute(self, X):
        bx, tx = check_tasked(X, self.n_tasks)
        return self.base.precompute(bx), tx

    def __call__(self, X, Y=None, eval_gradient=False, precomputed=None):
        base_pre = None
        if precomputed is not None:
            base_pre, tx = precomputed
            bx, by, ty = None, None, tx
        else:
            bx, tx = check_tasked(X, self.n_tasks)
            if Y is None:
                by, ty = None, tx
            else:
                by, ty = check_tasked(Y, self.n_tasks, name="Y")
        B = self.B
        Bsel = B[np.ix_(tx, ty)]
        if not eval_gradient:
            return self.base(bx, by, precomputed=base_pre) * Bsel
        Kb, Gb = self.base(bx, by, eval_gradient=True, precomputed=base_pre)
        grads = [G * Bsel for G in Gb]
        rows, cols = self._tril_indices()
        for p, q in zip(rows, cols):
            dB = np.zeros_like(B)
            dB[p, :] += self.L[:, q]
            dB[:, p] += self.L[:, q]
            grads.append(Kb * dB[np.ix_(tx, ty)])
        return Kb * Bsel, np.stack(grads, axis=0)

    def diag(self, X):
        bx, tx = check_tasked(X, self.n_tasks)
        return self.base.diag(bx) * self.B[tx, tx]

    @property
    def theta(self):
        return np.concatenate((self.base.theta, self.L[self._tril_indices()]))

    @theta.setter
    def theta(self, value):
        value = np.asarray(value, dtype=float)
        nb = self.base.theta.size
        self.base.theta = value[:nb]
        L = np.zeros((self.n_tasks, self.n_tasks))
        L[self._tril_indices()] = value[nb:]
        self.L = L

    @property
    def theta_bounds(self):
        n_l = self._tril_indices()[0].size
        return list(self.base.theta_bounds) + [(-1e3, 1e3)] * n_l

    @property
    def raw_theta_mask(self):
        """True for entries that are raw (not log-transformed) parameters."""
        mask = np.zeros(self.theta.size, dtype=bool)
        mask[self.base.theta.size :] = True
        return mask

    def clone(self):
        return ICM(self.base.clone(), self.n_tasks, self.L.copy())

    def to_dict(self):
        return {
            "family": self.tag,
            "base": self.base.to_dict(),
            "n_tasks": self.n_tasks,
            "L": self.L.tolist(),
        }


KERNEL_TAGS = {
    k.tag: k
    for k in (
        SquaredExponential,
        Matern12,
        Matern32,
        Matern52,
        RationalQuadratic,
        Tanimoto,
        ScalarProduct,
        StringNGram,
        ICM,
    )
}


def kernel_from_dict(doc):
    """Rebuild a kernel from its JSON document."""
    doc = dict(doc)
    family = doc.pop("family", None)
    cls = KERNEL_TAGS.get(family)
    if cls is None:
        raise InvalidInputError(f"unknown kernel family {family!r}")
    if cls is ICM:
        return ICM(kernel_from_dict(doc["base"]), doc["n_tasks"], np.array(doc["L"]))
    if cls is StringNGram:
        return StringNGram(doc["signal_variance"], doc.get("ngram_order", 5))
    if cls is RationalQuadratic:
        return RationalQuadratic(doc["signal_variance"], doc["lengthscales"], doc["alpha"])
    if issubclass(cls, _StationaryKernel):
        return cls(doc["signal_variance"], doc["lengthscales"])
    return cls(doc["signal_variance"])
