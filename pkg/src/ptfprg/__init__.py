"""Pseudorandom generator for degree-2 polynomial threshold functions.

Main entry points: :func:`derive_params` / :func:`empirical_params` build a
:class:`GeneratorConfig`; :func:`sample` and :func:`sample_batch` evaluate the
generator; :mod:`ptfprg.harness` measures how well it fools quadratic
threshold functions.
"""

__version__ = "0.1.0"

from .approx_gaussian import ApproxGaussianSpec  # noqa: E402
from .errors import ConvergenceError, NotClosedFormError, SeedUnderflowError  # noqa: E402
from .generator import (  # noqa: E402
    GeneratorConfig,
    derive_params,
    empirical_params,
    families,
    family_batch,
    hybrid_sample,
    random_words,
    sample,
    sample_batch,
    seed_length,
)
from .nisan import ROBP, NisanParams, expand  # noqa: E402
from .quadratic import Quadratic, decompose_approx_linear, eigendecompose, restrict  # noqa: E402

__all__ = [
    "ApproxGaussianSpec",
    "ConvergenceError",
    "GeneratorConfig",
    "NisanParams",
    "NotClosedFormError",
    "Quadratic",
    "ROBP",
    "SeedUnderflowError",
    "decompose_approx_linear",
    "derive_params",
    "eigendecompose",
    "empirical_params",
    "expand",
    "families",
    "family_batch",
    "hybrid_sample",
    "random_words",
    "restrict",
    "sample",
    "sample_batch",
    "seed_length",
]
