"""Nested quadrature for models with high-dimensional latent variables.

For a joint density pi(W, theta, Y) with latent W too large to put a
grid over, each hyperparameter value theta gets a Gaussian-curvature
(one-point) approximation of the W integral, producing a profiled log
density over theta alone.  Adaptive quadrature over theta then yields
the normalizing constant, and the per-node latent modes and curvatures
define a Gaussian mixture that posterior draws of W are sampled from.

Outer derivatives are synthesized by finite differences, so every probe
re-runs the inner optimization; each solve warm-starts from the most
recent latent mode to keep that affordable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.linalg import solve_triangular
from scipy.sparse.linalg import splu

from .exceptions import InnerOptimizationError, NonPositiveDefiniteError
from .fit import AGHQFit, aghq
from .optimize import ObjectiveBundle, OptControl, _minimize_dogleg

__all__ = [
    "LatentBundle",
    "MarginalLaplaceFit",
    "PosteriorSamples",
    "laplace_profile",
    "marginal_laplace",
    "sample_marginal",
]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class LatentBundle:
    """Joint log density over (W, theta) with derivatives in W.

    ``fn(W, theta)`` returns log pi(W, theta, Y); ``gr_W`` its gradient
    in W; ``he_W`` the negative Hessian in W (the precision-like
    curvature matrix, positive definite at every inner optimum).
    ``he_W`` may return a scipy sparse matrix, which the inner
    trust-region solves keep sparse.
    """

    fn: Callable
    gr_W: Callable
    he_W: Callable
    dim_w: int
    dim_theta: int


@dataclass(frozen=True)
class MarginalLaplaceFit:
    """Hyperparameter fit plus the per-node latent Gaussian components.

    ``modesandhessians`` has one row per hyperparameter quadrature node
    with the node coordinates, the latent mode, and the latent curvature.
    ``lambda_`` holds the mixture weights, summing to 1.
    """

    outer: AGHQFit
    modesandhessians: pd.DataFrame
    lambda_: np.ndarray


@dataclass(frozen=True)
class PosteriorSamples:
    """Latent draws (one column per draw) and the component per draw."""

    samps: np.ndarray
    theta: np.ndarray
    rng_seed: int

    def to_csv(self, path) -> None:
        """Write one row per draw: theta columns, then latent coordinates."""
        d_theta = self.theta.shape[1]
        d_w = self.samps.shape[0]
        frame = pd.DataFrame(
            np.hstack([self.theta, self.samps.T]),
            columns=[f"theta{i + 1}" for i in range(d_theta)]
            + [f"w{i + 1}" for i in range(d_w)],
        )
        frame.to_csv(path, index=False)


def _inner_control() -> OptControl:
    # tight tolerance keeps the profiled objective smooth under
    # finite-difference probing from the outer optimizer
    return OptControl(method="sparse_trust_region", gradient_tolerance=1e-8)


def _log_det_positive(matrix) -> float:
    """log det of a positive definite matrix, sparse or dense."""
    if sp.issparse(matrix):
        lu = splu(matrix.tocsc())
        diag = lu.U.diagonal()
        if np.any(diag == 0.0) or not np.all(np.isfinite(diag)):
            raise NonPositiveDefiniteError("latent curvature matrix is singular")
        return float(np.sum(np.log(np.abs(diag))))
    try:
        chol = np.linalg.cholesky(np.asarray(matrix, dtype=float))
    except np.linalg.LinAlgError:
        raise NonPositiveDefiniteError(
            "latent curvature matrix is not positive definite"
        ) from None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def laplace_profile(
    bundle: LatentBundle,
    theta: np.ndarray,
    w_start: np.ndarray,
    control: Optional[OptControl] = None,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Integrate the latent variables out at one hyperparameter value.

    Maximizes W -> fn(W, theta) from ``w_start`` (sparse trust region by
    default) and returns the Gaussian-curvature approximation

        fn(W_hat, theta) + (d_W / 2) log(2 pi) - log det H(theta) / 2

    along with the latent mode W_hat and curvature H(theta) for reuse.

    Raises
    ------
    InnerOptimizationError
        If the inner solve fails to converge or the curvature at its
        result is not positive definite; the message carries ``theta``.
    """
    if control is None:
        control = _inner_control()
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    w0 = np.atleast_1d(np.asarray(w_start, dtype=float))

    def neg_fn(w):
        return -float(bundle.fn(w, theta))

    def neg_grad(w):
        return -np.asarray(bundle.gr_W(w, theta), dtype=float)

    def curvature(w):
        # he_W already carries the minimization curvature (negative Hessian)
        H = bundle.he_W(w, theta)
        if sp.issparse(H) and control.method != "sparse_trust_region":
            H = H.toarray()
        return H

    w_mode, _, status = _minimize_dogleg(
        neg_fn, neg_grad, curvature, w0, control.gradient_tolerance,
        control.max_iterations,
    )
    if status != "converged":
        raise InnerOptimizationError(
            f"latent optimization ended with status {status!r} at theta = {theta}"
        )
    hessian = bundle.he_W(w_mode, theta)
    if sp.issparse(hessian):
        hessian = 0.5 * (hessian + hessian.T)
    else:
        hessian = np.atleast_2d(np.asarray(hessian, dtype=float))
        hessian = 0.5 * (hessian + hessian.T)
    try:
        half_log_det = 0.5 * _log_det_positive(hessian)
    except NonPositiveDefiniteError as err:
        raise InnerOptimizationError(
            f"latent curvature is not positive definite at theta = {theta}"
        ) from err
    log_la = float(bundle.fn(w_mode, theta)) + 0.5 * w0.size * _LOG_2PI - half_log_det
    return log_la, w_mode, hessian


def marginal_laplace(
    bundle: LatentBundle,
    k: int,
    start: Tuple[np.ndarray, np.ndarray],
    control: Optional[OptControl] = None,
    inner_control: Optional[OptControl] = None,
) -> MarginalLaplaceFit:
    """Fit the hyperparameter posterior with the latent variables profiled out.

    Parameters
    ----------
    bundle : LatentBundle
        Joint log density with latent derivatives.
    k : int
        Quadrature points per hyperparameter dimension.
    start : tuple
        (latent start, hyperparameter start).
    control : OptControl, optional
        Outer optimizer configuration; defaults to the trust region.
    inner_control : OptControl, optional
        Inner (latent) solver configuration; defaults to the sparse
        trust region with an 1e-8 gradient tolerance.

    Returns
    -------
    MarginalLaplaceFit
        The hyperparameter fit, the latent mode and curvature per node,
        and the mixture weights.
    """
    w_start, theta_start = start
    theta_start = np.atleast_1d(np.asarray(theta_start, dtype=float))
    if control is None:
        control = OptControl(method="trust_region")
    if inner_control is None:
        inner_control = _inner_control()
    warm = {"w": np.atleast_1d(np.asarray(w_start, dtype=float))}

    def profiled(theta):
        value, w_mode, _ = laplace_profile(bundle, theta, warm["w"], inner_control)
        warm["w"] = w_mode
        return value

    outer_bundle = ObjectiveBundle(fn=profiled, dim=bundle.dim_theta)
    outer_fit = aghq(outer_bundle, k, theta_start, control=control)

    posterior = outer_fit.normalized_posterior
    nodes = posterior.theta_matrix
    modes = []
    hessians = []
    for theta in nodes:
        _, w_mode, hessian = laplace_profile(bundle, theta, warm["w"], inner_control)
        warm["w"] = w_mode
        modes.append(w_mode)
        hessians.append(hessian)
    frame = {
        f"theta{i + 1}": nodes[:, i] for i in range(bundle.dim_theta)
    }
    frame["mode"] = modes
    frame["hessian"] = hessians
    lambda_ = posterior.weights * np.exp(posterior.logpost_normalized)
    return MarginalLaplaceFit(
        outer=outer_fit,
        modesandhessians=pd.DataFrame(frame),
        lambda_=lambda_,
    )


def sample_marginal(fit: MarginalLaplaceFit, M: int, seed: int = 0) -> PosteriorSamples:
    """Draw M latent vectors from the fitted Gaussian mixture.

    Component counts are drawn once from Multinomial(M, lambda); each
    component j then contributes its count of draws W_hat_j + L_j^{-T} z
    with z standard normal and L_j the lower Cholesky factor of the
    stored curvature, so no covariance matrix is ever formed.  Output
    columns are grouped by component.  Identical seeds give bit-identical
    output.

    Raises
    ------
    NonPositiveDefiniteError
        If a stored curvature matrix fails its Cholesky factorization.
    """
    if M < 1:
        raise ValueError(f"number of draws must be at least 1, got {M}")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(M, fit.lambda_ / fit.lambda_.sum())
    table = fit.modesandhessians
    theta_nodes = fit.outer.normalized_posterior.theta_matrix
    columns = []
    theta_rows = []
    for j, count in enumerate(counts):
        if count == 0:
            continue
        w_mode = np.asarray(table["mode"].iloc[j], dtype=float)
        hessian = table["hessian"].iloc[j]
        if sp.issparse(hessian):
            hessian = hessian.toarray()
        try:
            lower = np.linalg.cholesky(np.asarray(hessian, dtype=float))
        except np.linalg.LinAlgError:
            raise NonPositiveDefiniteError(
                f"stored curvature for component {j} is not positive definite; "
                f"the fit is corrupt"
            ) from None
        z = rng.standard_normal((w_mode.size, count))
        draws = w_mode[:, None] + solve_triangular(lower.T, z, lower=False)
        columns.append(draws)
        theta_rows.append(np.tile(theta_nodes[j], (count, 1)))
    samps = np.hstack(columns)
    theta = np.vstack(theta_rows)
    return PosteriorSamples(samps=samps, theta=theta, rng_seed=seed)
