"""Acquisition functions for noisy Bayesian optimisation.

All functions assume minimisation and are pure: expected improvement with
a plug-in incumbent, its augmented variant for a fixed noise level, the
heteroscedastic augmented variant driven by the input-dependent noise
r(x), and the aleatoric-noise-penalised scalarisation. Maximisation
problems are handled upstream by negating targets.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .exceptions import InvalidInputError

__all__ = [
    "AcquisitionSpec",
    "incumbent",
    "expected_improvement",
    "augmented_ei",
    "heteroscedastic_aei",
    "anpei",
    "evaluate_acquisition",
]

ACQUISITION_KINDS = ("ei", "aei", "haei", "anpei", "random")


@dataclass(frozen=True)
class AcquisitionSpec:
    """Choice of acquisition plus exactly its own parameters.

    ``gamma`` belongs to haei (> 0), ``beta`` to anpei (in [0, 1]) and
    ``fixed_noise`` (a standard deviation, >= 0) to aei.
    """

    kind: str
    gamma: Optional[float] = None
    beta: Optional[float] = None
    fixed_noise: Optional[float] = None
    direction: str = "minimise"

    def __post_init__(self):
        if self.kind not in ACQUISITION_KINDS:
            raise InvalidInputError(
                f"unknown acquisition {self.kind!r}; choose from {ACQUISITION_KINDS}"
            )
        if self.direction not in ("minimise", "maximise"):
            raise InvalidInputError("direction must be 'minimise' or 'maximise'")
        required = {"haei": "gamma", "anpei": "beta", "aei": "fixed_noise"}.get(self.kind)
        for name in ("gamma", "beta", "fixed_noise"):
            value = getattr(self, name)
            if name == required:
                if value is None:
                    raise InvalidInputError(f"{self.kind} requires {name}")
            elif value is not None:
                raise InvalidInputError(f"{name} is not a parameter of {self.kind}")
        if self.kind == "haei" and self.gamma <= 0:
            raise InvalidInputError("gamma must be positive")
        if self.kind == "anpei" and not 0.0 <= self.beta <= 1.0:
            raise InvalidInputError("beta must lie in [0, 1]")
        if self.kind == "aei" and self.fixed_noise < 0:
            raise InvalidInputError("fixed_noise must be >= 0")

    @property
    def needs_noise_model(self):
        return self.kind in ("haei", "anpei")


def incumbent(model, observed_inputs):
    """Plug-in incumbent: best (smallest) posterior mean over observed inputs."""
    return float(np.min(model.predict(observed_inputs)))


def expected_improvement(mean, std, eta):
    """Closed-form EI for minimisation; std may contain zeros."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if np.any(std < 0):
        raise InvalidInputError("std must be >= 0")
    gap = eta - mean
    # tiny std makes u astronomically large; cdf/pdf saturate to the right
    # limits, so the overflow in between is harmless
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = np.where(std > 0, gap / np.where(std > 0, std, 1.0), 0.0)
        ei = np.where(
            std > 0,
            gap * norm.cdf(u) + std * norm.pdf(u),
            np.maximum(gap, 0.0),
        )
    return np.maximum(ei, 0.0)


def augmented_ei(mean, std, eta, fixed_noise):
    """EI rescaled by 1 - sigma_n / sqrt(var + sigma_n^2)."""
    ei = expected_improvement(mean, std, eta)
    if fixed_noise == 0:
        return ei
    var = np.asarray(std, dtype=float) ** 2
    return ei * (1.0 - fixed_noise / np.sqrt(var + fixed_noise**2))


def heteroscedastic_aei(mean, var, noise_var, eta, gamma):
    """EI rescaled by 1 - gamma*sqrt(r) / sqrt(var + gamma^2 r).

    The factor is 1 where r = 0 and the whole expression 0 where the
    epistemic variance vanishes but r > 0; with both zero the factor is
    defined as 1 so plain (zero-variance) EI is returned.
    """
    var = np.asarray(var, dtype=float)
    noise_var = np.asarray(noise_var, dtype=float)
    if np.any(var < 0) or np.any(noise_var < 0):
        raise InvalidInputError("variances must be >= 0")
    ei = expected_improvement(mean, np.sqrt(var), eta)
    root = np.sqrt(var + gamma**2 * noise_var)
    factor = np.where(
        noise_var > 0,
        1.0 - gamma * np.sqrt(noise_var) / np.where(root > 0, root, 1.0),
        1.0,
    )
    # vanished epistemic variance with r > 0 gives exactly zero, not roundoff
    factor = np.where((var == 0) & (noise_var > 0), 0.0, factor)
    return ei * factor


def anpei(mean, std, noise_var, eta, beta):
    """beta * EI - (1 - beta) * sqrt(r), computed in standardised units."""
    noise_var = np.asarray(noise_var, dtype=float)
    ei = expected_improvement(mean, std, eta)
    return beta * ei - (1.0 - beta) * np.sqrt(noise_var)


def evaluate_acquisition(spec, mean, var_epi, noise_var, eta):
    """Dispatch on the spec; inputs follow the minimisation convention."""
    std = np.sqrt(np.asarray(var_epi, dtype=float))
    if spec.kind == "ei":
        return expected_improvement(mean, std, eta)
    if spec.kind == "aei":
        return augmented_ei(mean, std, eta, spec.fixed_noise)
    if spec.kind == "haei":
        return heteroscedastic_aei(mean, var_epi, noise_var, eta, spec.gamma)
    if spec.kind == "anpei":
        return anpei(mean, std, noise_var, eta, spec.beta)
    raise InvalidInputError(f"acquisition {spec.kind!r} has no pointwise value")
