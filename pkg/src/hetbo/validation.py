"""Input validation helpers.

Inputs come in four kinds: real feature matrices, non-negative count/bit
matrices, string sequences, and (features, task-index) pairs for the
multitask kernel. Validators normalise each kind to a canonical numpy
representation and raise :class:`InvalidInputError` on violations.
"""

import numpy as np

from .exceptions import InvalidInputError


def check_real_matrix(X, name="X"):
    """Coerce to a 2-D float array, rejecting non-finite entries."""
    try:
        X = np.asarray(X, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name} is not numeric: {exc}") from exc
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return X


def check_count_matrix(X, name="X"):
    """Coerce to a 2-D non-negative float array (bit or count vectors)."""
    X = check_real_matrix(X, name=name)
    if np.any(X < 0):
        raise InvalidInputError(f"{name} must be non-negative for this kernel")
    return X


def check_strings(X, name="X"):
    """Coerce to a list of python strings."""
    if isinstance(X, np.ndarray):
        X = X.tolist()
    if isinstance(X, str):
        raise InvalidInputError(f"{name} must be a sequence of strings, not one string")
    out = list(X)
    for i, s in enumerate(out):
        if not isinstance(s, str):
            raise InvalidInputError(f"{name}[{i}] is not a string ({type(s).__name__})")
    return out


def check_tasked(X, n_tasks, name="X"):
    """Validate a (base_inputs, task_indices) pair for the multitask kernel.

    Returns ``(base, tasks)`` with ``tasks`` an int array in ``[0, n_tasks)``.
    The base inputs are left untouched; the wrapped kernel validates them.
    """
    if not (isinstance(X, tuple) and len(X) == 2):
        raise InvalidInputError(
            f"{name} must be a (inputs, tasks) pair for a multitask kernel"
        )
    base, tasks = X
    tasks = np.asarray(tasks)
    if tasks.ndim != 1:
        raise InvalidInputError(f"{name} task indices must be 1-D")
    if not np.issubdtype(tasks.dtype, np.integer):
        as_int = tasks.astype(int)
        if not np.all(as_int == tasks):
            raise InvalidInputError(f"{name} task indices must be integers")
        tasks = as_int
    if np.any(tasks < 0) or np.any(tasks >= n_tasks):
        raise InvalidInputError(
            f"{name} task indices must lie in [0, {n_tasks}), got range "
            f"[{tasks.min()}, {tasks.max()}]"
        )
    return base, tasks


def check_targets(y, n=None, name="y"):
    """Coerce targets to a finite 1-D float array of length ``n``."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 1:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError(f"{name} contains non-finite values")
    if n is not None and y.size != n:
        raise InvalidInputError(f"{name} has length {y.size}, expected {n}")
    return y


def n_inputs(X):
    """Number of inputs in any of the supported representations."""
    if isinstance(X, tuple):
        return n_inputs(X[0])
    if isinstance(X, np.ndarray):
        return X.shape[0]
    return len(X)


def take_inputs(X, idx):
    """Index into any supported input representation."""
    if isinstance(X, tuple):
        base, tasks = X
        return take_inputs(base, idx), np.asarray(tasks)[idx]
    if isinstance(X, np.ndarray):
        return X[idx]
    return [X[i] for i in np.atleast_1d(idx)]
