"""Adaptive Gauss-Hermite quadrature for Bayesian inference.

The package normalizes posteriors by Gauss-Hermite quadrature adapted
to the mode and curvature of the log posterior, and builds summaries
(moments, marginals, quantiles, transformed densities) from the
normalized fit.  Latent Gaussian models are handled by a nested scheme
that profiles the latent variables out with Laplace approximations
before the hyperparameter quadrature, and posterior samples are drawn
from the resulting Gaussian mixture.

Typical use::

    import numpy as np
    from aghq import ObjectiveBundle, aghq, summarize

    bundle = ObjectiveBundle(fn=log_posterior, dim=2)
    fit = aghq(bundle, k=3, start=np.zeros(2))
    print(summarize(fit))
"""

from .exceptions import (
    EvaluationError,
    GridTooLargeError,
    InnerOptimizationError,
    InvalidTransformationError,
    NonPositiveDefiniteError,
)
from .fit import (
    AdaptedGrid,
    AGHQFit,
    NormalizedPosterior,
    adapt_rule,
    aghq,
    laplace_log_normconst,
    normalize_logpost,
)
from .latent import (
    LatentBundle,
    MarginalLaplaceFit,
    PosteriorSamples,
    laplace_profile,
    marginal_laplace,
    sample_marginal,
)
from .optimize import (
    ObjectiveBundle,
    OptControl,
    OptResults,
    finite_diff_gradient,
    finite_diff_hessian,
    optimize_theta,
)
from .rules import (
    QuadRule1D,
    QuadRuleProduct,
    ghq_rule_1d,
    hermite_eval,
    product_rule,
    quadrature,
)
from .summaries import (
    FitSummary,
    MarginalPosterior,
    PdfCdfTable,
    Transformation,
    compute_moment,
    compute_pdf_and_cdf,
    compute_quantiles,
    interpolate_marginal,
    marginal_posterior,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "AGHQFit",
    "AdaptedGrid",
    "EvaluationError",
    "FitSummary",
    "GridTooLargeError",
    "InnerOptimizationError",
    "InvalidTransformationError",
    "LatentBundle",
    "MarginalLaplaceFit",
    "MarginalPosterior",
    "NonPositiveDefiniteError",
    "NormalizedPosterior",
    "ObjectiveBundle",
    "OptControl",
    "OptResults",
    "PdfCdfTable",
    "PosteriorSamples",
    "QuadRule1D",
    "QuadRuleProduct",
    "Transformation",
    "adapt_rule",
    "aghq",
    "compute_moment",
    "compute_pdf_and_cdf",
    "compute_quantiles",
    "finite_diff_gradient",
    "finite_diff_hessian",
    "ghq_rule_1d",
    "hermite_eval",
    "interpolate_marginal",
    "laplace_log_normconst",
    "laplace_profile",
    "marginal_laplace",
    "marginal_posterior",
    "normalize_logpost",
    "optimize_theta",
    "product_rule",
    "quadrature",
    "sample_marginal",
    "summarize",
]
