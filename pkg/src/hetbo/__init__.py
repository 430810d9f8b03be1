"""GP regression, noise-aware Bayesian optimisation, and lightcurve analysis."""

from .acquisition import (
    AcquisitionSpec,
    anpei,
    augmented_ei,
    expected_improvement,
    heteroscedastic_aei,
    incumbent,
)
from .bo import BOConfig, BOTrace, composite_eval, propose, run_bo, run_bo_seeds
from .exceptions import InvalidInputError, NumericalError
from .gp import GPRegressor
from .hetgp import MostLikelyHeteroscedasticGP, empirical_noise_levels
from .kernels import (
    ICM,
    Matern12,
    Matern32,
    Matern52,
    RationalQuadratic,
    ScalarProduct,
    SquaredExponential,
    StringNGram,
    Tanimoto,
    kernel_from_dict,
    ngram_counts,
)
from .metrics import MetricsReport, regression_metrics
from .objectives import (
    SyntheticObjective,
    TabularObjective,
    eval_objective,
    make_objective,
    sample_noisy,
    smoothed_noise_oracle,
)
from .timeseries import (
    Lightcurve,
    StructureFunctionResult,
    apply_gaps,
    coherence_lag,
    fit_broken_power_law,
    periodogram,
    rss,
    simulate_lightcurve,
    structure_function,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionSpec",
    "BOConfig",
    "BOTrace",
    "GPRegressor",
    "ICM",
    "InvalidInputError",
    "Lightcurve",
    "Matern12",
    "Matern32",
    "Matern52",
    "MetricsReport",
    "MostLikelyHeteroscedasticGP",
    "NumericalError",
    "RationalQuadratic",
    "ScalarProduct",
    "SquaredExponential",
    "StringNGram",
    "StructureFunctionResult",
    "SyntheticObjective",
    "TabularObjective",
    "Tanimoto",
    "anpei",
    "apply_gaps",
    "augmented_ei",
    "coherence_lag",
    "composite_eval",
    "empirical_noise_levels",
    "eval_objective",
    "expected_improvement",
    "fit_broken_power_law",
    "heteroscedastic_aei",
    "incumbent",
    "kernel_from_dict",
    "make_objective",
    "ngram_counts",
    "periodogram",
    "propose",
    "regression_metrics",
    "rss",
    "run_bo",
    "run_bo_seeds",
    "sample_noisy",
    "simulate_lightcurve",
    "smoothed_noise_oracle",
    "structure_function",
]
