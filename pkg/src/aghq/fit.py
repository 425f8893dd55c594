"""Adaptive quadrature: grid adaptation, normalization, and fit assembly.

A base Gauss-Hermite product grid is shifted to the posterior mode and
scaled by the lower Cholesky factor L of the inverse negative Hessian,
so the grid matches the posterior's location and local correlation
structure.  Integrating the un-normalized posterior over the adapted
grid yields the log normalizing constant; with a single node per
dimension this reduces exactly to the Laplace approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from .exceptions import EvaluationError, NonPositiveDefiniteError
from .optimize import ObjectiveBundle, OptControl, OptResults, optimize_theta
from .rules import QuadRuleProduct, product_rule

__all__ = [
    "AGHQFit",
    "AdaptedGrid",
    "NormalizedPosterior",
    "adapt_rule",
    "aghq",
    "laplace_log_normconst",
    "normalize_logpost",
]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class AdaptedGrid:
    """A product rule recentered at ``mode`` and rescaled by ``cholesky_lower``.

    Row j of ``nodes`` is ``mode + L @ z_j`` for base node row z_j, and
    ``weights[j]`` is the base weight times det(L).
    """

    base: QuadRuleProduct
    mode: np.ndarray
    cholesky_lower: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def log_weights(self) -> np.ndarray:
        # det(L) enters in log space so huge d cannot overflow the product
        log_det = float(np.sum(np.log(np.diag(self.cholesky_lower))))
        return np.log(self.base.weights) + log_det


@dataclass(frozen=True)
class NormalizedPosterior:
    """Adapted grid with posterior values and the log normalizing constant.

    ``nodesandweights`` has one row per adapted node with columns
    theta1..theta{d}, weight, logpost, logpost_normalized, where
    logpost_normalized = logpost - lognormconst row-wise.
    """

    nodesandweights: pd.DataFrame
    lognormconst: float
    grid: AdaptedGrid

    @property
    def theta_matrix(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    @property
    def logpost(self) -> np.ndarray:
        return self.nodesandweights["logpost"].to_numpy()

    @property
    def logpost_normalized(self) -> np.ndarray:
        return self.nodesandweights["logpost_normalized"].to_numpy()


@dataclass(frozen=True)
class AGHQFit:
    """Normalized posterior plus one marginal per coordinate."""

    normalized_posterior: NormalizedPosterior
    marginals: List
    optresults: OptResults
    k: int


def adapt_rule(base: QuadRuleProduct, mode, hessian) -> AdaptedGrid:
    """Shift and scale a base rule by a mode and negative Hessian.

    Computes the inverse of ``hessian`` and its lower Cholesky factor L,
    then maps base nodes z to mode + L z and multiplies weights by
    det(L).

    Raises
    ------
    NonPositiveDefiniteError
        If ``hessian`` is not symmetric positive definite.
    """
    mode = np.atleast_1d(np.asarray(mode, dtype=float))
    hessian = np.atleast_2d(np.asarray(hessian, dtype=float))
    if mode.size != base.dim:
        raise ValueError(f"mode has {mode.size} coordinates, rule dim is {base.dim}")
    hessian = 0.5 * (hessian + hessian.T)
    try:
        inverse = np.linalg.inv(hessian)
        lower = np.linalg.cholesky(inverse)
    except np.linalg.LinAlgError:
        raise NonPositiveDefiniteError(
            "cannot adapt the quadrature grid: the supplied negative Hessian "
            "is not positive definite"
        ) from None
    nodes = mode + base.nodes @ lower.T
    det = math.exp(float(np.sum(np.log(np.diag(lower)))))
    return AdaptedGrid(
        base=base,
        mode=mode,
        cholesky_lower=lower,
        nodes=nodes,
        weights=base.weights * det,
    )


def _evaluate_logpost(bundle: ObjectiveBundle, nodes: np.ndarray) -> np.ndarray:
    values = np.empty(nodes.shape[0])
    for j, row in enumerate(nodes):
        values[j] = float(bundle.fn(row.copy()))
        if not math.isfinite(values[j]):
            raise EvaluationError(
                f"log posterior is non-finite at adapted node {j} "
                f"(theta = {row}); the grid likely left the posterior's "
                f"support, transform constraints away before fitting"
            )
    return values


def normalize_logpost(
    bundle: ObjectiveBundle, optres: OptResults, k: int
) -> NormalizedPosterior:
    """Evaluate the bundle over the adapted k-point grid and normalize.

    The log normalizing constant is logsumexp over nodes of
    logpost + log(weight), anchored at the maximum so peaked posteriors
    cannot overflow.
    """
    if k < 1:
        raise ValueError(f"node count must be at least 1, got {k}")
    d = int(np.atleast_1d(optres.mode).size)
    grid = adapt_rule(product_rule(d, k), optres.mode, optres.hessian)
    logpost = _evaluate_logpost(bundle, grid.nodes)
    lognormconst = float(logsumexp(logpost + grid.log_weights))
    frame = {f"theta{i + 1}": grid.nodes[:, i] for i in range(d)}
    frame["weight"] = grid.weights
    frame["logpost"] = logpost
    frame["logpost_normalized"] = logpost - lognormconst
    return NormalizedPosterior(
        nodesandweights=pd.DataFrame(frame), lognormconst=lognormconst, grid=grid
    )


def laplace_log_normconst(bundle: ObjectiveBundle, optres: OptResults) -> float:
    """Closed-form Gaussian-curvature approximation of the log integral.

    Returns fn(mode) + (d/2) log(2 pi) - log det(H) / 2, which the
    one-point adapted rule reproduces exactly.
    """
    mode = np.atleast_1d(optres.mode)
    value = float(bundle.fn(mode))
    if not math.isfinite(value):
        raise EvaluationError(f"log posterior is non-finite at the mode {mode}")
    try:
        chol = np.linalg.cholesky(optres.hessian)
    except np.linalg.LinAlgError:
        raise NonPositiveDefiniteError(
            "negative Hessian in the optimization results is not positive definite"
        ) from None
    half_log_det = float(np.sum(np.log(np.diag(chol))))
    return value + 0.5 * mode.size * _LOG_2PI - half_log_det


def aghq(
    bundle: ObjectiveBundle,
    k: int,
    start,
    optresults: Optional[OptResults] = None,
    control: Optional[OptControl] = None,
) -> AGHQFit:
    """Fit the posterior with a k-point adapted quadrature per dimension.

    Parameters
    ----------
    bundle : ObjectiveBundle
        Log un-normalized posterior with optional derivatives.
    k : int
        Nodes per dimension; k=1 is the Laplace approximation.
    start : array_like
        Optimizer starting point (ignored when ``optresults`` is given).
    optresults : OptResults, optional
        Pre-computed mode and negative Hessian, used verbatim; no
        optimization runs.  Lets callers bring modes found by external
        solvers.
    control : OptControl, optional
        Optimizer configuration for the internal mode search.

    Returns
    -------
    AGHQFit
        Normalized posterior, per-coordinate marginals, and the
        optimization results used.
    """
    if k < 1:
        raise ValueError(f"node count must be at least 1, got {k}")
    if optresults is None:
        optresults = optimize_theta(bundle, start, control)
    posterior = normalize_logpost(bundle, optresults, k)
    from .summaries import marginal_posterior

    d = int(np.atleast_1d(optresults.mode).size)
    marginals = [
        marginal_posterior(bundle, optresults, k, t, normalized=posterior)
        for t in range(d)
    ]
    return AGHQFit(
        normalized_posterior=posterior, marginals=marginals, optresults=optresults, k=k
    )
