"""Posterior summaries: moments, marginals, densities, quantiles.

Marginal densities are known only at the k quadrature points of their
coordinate, so a degree-(k-1) polynomial interpolant of the log density
bridges the gaps; exponentiating keeps the result positive.  The
cumulative distribution comes from a left Riemann sum over a fine grid
and quantiles invert it by taking the smallest grid point whose
cumulative mass reaches the requested level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Union

import numpy as np
import pandas as pd
from scipy.interpolate import BarycentricInterpolator
from scipy.special import logsumexp

from .exceptions import EvaluationError, InvalidTransformationError
from .fit import AGHQFit, NormalizedPosterior, adapt_rule
from .optimize import OptResults, ObjectiveBundle
from .rules import ghq_rule_1d, product_rule

__all__ = [
    "DEFAULT_GRID_SIZE",
    "FitSummary",
    "MarginalPosterior",
    "PdfCdfTable",
    "Transformation",
    "compute_moment",
    "compute_pdf_and_cdf",
    "compute_quantiles",
    "interpolate_marginal",
    "marginal_posterior",
    "summarize",
]

DEFAULT_GRID_SIZE = 1000

# half-width, in posterior standard deviations, of the density grid when
# only a single support point exists
_ONE_POINT_SPAN = 5.0

_EPS = float(np.finfo(float).eps)
_JACOBIAN_STEP = _EPS ** (1.0 / 3.0)


@dataclass(frozen=True)
class MarginalPosterior:
    """One coordinate's marginal density at its k support points.

    ``w`` holds the adapted one-dimensional weights of the coordinate, so
    sum(w * exp(logmargpost)) is 1 up to floating error.  ``scale`` is
    the coordinate's posterior standard deviation implied by the
    curvature at the mode; it drives the one-point (Gaussian) fallback.
    """

    index: int
    theta: np.ndarray
    logmargpost: np.ndarray
    w: np.ndarray
    scale: float


@dataclass(frozen=True)
class Transformation:
    """Inverse pair of monotone maps between parameter scales.

    ``totheta`` sends the reporting scale to the quadrature scale and
    ``fromtheta`` undoes it.
    """

    totheta: Callable
    fromtheta: Callable


@dataclass(frozen=True)
class PdfCdfTable:
    """Density and cumulative values on a fine grid, optionally transformed."""

    theta: np.ndarray
    pdf: np.ndarray
    cdf: np.ndarray
    transparam: Optional[np.ndarray] = None
    pdf_transparam: Optional[np.ndarray] = None

    def to_frame(self) -> pd.DataFrame:
        columns = {"theta": self.theta, "pdf": self.pdf, "cdf": self.cdf}
        if self.transparam is not None:
            columns["transparam"] = self.transparam
            columns["pdf_transparam"] = self.pdf_transparam
        return pd.DataFrame(columns)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


def _as_transformation(obj) -> Transformation:
    if isinstance(obj, Transformation):
        return obj
    if isinstance(obj, Mapping):
        return Transformation(totheta=obj["totheta"], fromtheta=obj["fromtheta"])
    raise TypeError(
        "transformation must be a Transformation or a mapping with "
        "'totheta' and 'fromtheta' entries"
    )


def compute_moment(post: NormalizedPosterior, f: Callable) -> Union[float, np.ndarray]:
    """Posterior expectation of ``f`` under the normalized fit.

    ``f`` receives one length-d array per node and may return a scalar or
    a vector; the result is the weighted sum of its values against
    weight * exp(logpost_normalized).
    """
    density = post.weights * np.exp(post.logpost_normalized)
    values = []
    for j, row in enumerate(post.theta_matrix):
        val = np.atleast_1d(np.asarray(f(row.copy()), dtype=float))
        if not np.all(np.isfinite(val)):
            raise EvaluationError(
                f"moment integrand returned a non-finite value at node {j} "
                f"(theta = {row})"
            )
        values.append(val)
    stacked = np.vstack(values)
    result = stacked.T @ density
    return float(result[0]) if result.size == 1 else result


def marginal_posterior(
    bundle: ObjectiveBundle,
    optres: OptResults,
    k: int,
    t: int,
    normalized: Optional[NormalizedPosterior] = None,
) -> MarginalPosterior:
    """Marginal density of coordinate ``t`` at its k quadrature points.

    The coordinates are permuted so that t comes first, the Cholesky
    factor of the permuted inverse Hessian is recomputed (the factor
    depends on coordinate order), the adapted grid is rebuilt in the
    permuted order and renormalized, and the joint mass is summed over
    the remaining coordinates for each of the k first-coordinate values.

    ``t`` is a 0-based coordinate index.  For d=1 this is the normalized
    posterior itself.  ``normalized`` lets the t=0 call reuse an existing
    fit's evaluations instead of re-running the bundle.
    """
    mode = np.atleast_1d(optres.mode)
    d = mode.size
    if not 0 <= t < d:
        raise ValueError(f"coordinate index {t} outside 0..{d - 1}")
    perm = np.concatenate(([t], np.delete(np.arange(d), t)))

    reusable = (
        t == 0
        and normalized is not None
        and normalized.grid.base.k_per_dim == k
    )
    if reusable:
        grid = normalized.grid
        log_density = normalized.logpost_normalized + grid.log_weights
    else:
        base = product_rule(d, k)
        grid = adapt_rule(base, mode[perm], optres.hessian[np.ix_(perm, perm)])
        logpost = np.empty(grid.nodes.shape[0])
        for j, row in enumerate(grid.nodes):
            theta = np.empty(d)
            theta[perm] = row
            logpost[j] = float(bundle.fn(theta))
            if not math.isfinite(logpost[j]):
                raise EvaluationError(
                    f"log posterior is non-finite at reordered node {j} "
                    f"(theta = {theta})"
                )
        log_weights = grid.log_weights
        lognormconst = float(logsumexp(logpost + log_weights))
        log_density = logpost - lognormconst + log_weights

    rule1 = ghq_rule_1d(k)
    scale = float(grid.cholesky_lower[0, 0])
    support = mode[t] + scale * rule1.nodes
    w_marginal = rule1.weights * scale
    first_index = np.arange(log_density.size) % k
    logmargpost = np.array(
        [logsumexp(log_density[first_index == j]) for j in range(k)]
    ) - np.log(w_marginal)
    return MarginalPosterior(
        index=t, theta=support, logmargpost=logmargpost, w=w_marginal, scale=scale
    )


def interpolate_marginal(mp: MarginalPosterior) -> Callable:
    """Polynomial interpolant of the log marginal density.

    Returns a callable evaluating the degree-(k-1) polynomial through the
    k support points; it accepts scalars or arrays.  A single support
    point has no polynomial, so the log density of the Gaussian with the
    marginal's mode and scale is returned instead.
    """
    theta = np.asarray(mp.theta, dtype=float)
    if np.unique(theta).size != theta.size:
        raise ValueError("marginal support points must be distinct")
    if theta.size == 1:
        center = float(theta[0])
        sd = float(mp.scale)
        norm_const = -0.5 * math.log(2.0 * math.pi) - math.log(sd)

        def gaussian_logpdf(x):
            x = np.asarray(x, dtype=float)
            out = norm_const - 0.5 * ((x - center) / sd) ** 2
            return out if out.ndim else float(out)

        return gaussian_logpdf
    interpolant = BarycentricInterpolator(theta, np.asarray(mp.logmargpost))

    def logpdf(x):
        out = interpolant(np.asarray(x, dtype=float))
        return out if np.ndim(out) else float(out)

    return logpdf


def _default_grid(mp: MarginalPosterior) -> np.ndarray:
    if mp.theta.size == 1:
        half = _ONE_POINT_SPAN * mp.scale
        return np.linspace(mp.theta[0] - half, mp.theta[0] + half, DEFAULT_GRID_SIZE)
    low, high = float(mp.theta.min()), float(mp.theta.max())
    half = 0.5 * (high - low)
    return np.linspace(low - half, high + half, DEFAULT_GRID_SIZE)


def _transform_columns(transformation, grid: np.ndarray, pdf: np.ndarray):
    trans = _as_transformation(transformation)
    transparam = np.array([float(trans.fromtheta(v)) for v in grid])
    jacobian = np.empty_like(transparam)
    roundtrip = np.empty_like(transparam)
    for i, lam in enumerate(transparam):
        h = _JACOBIAN_STEP * max(1.0, abs(lam))
        up = float(trans.totheta(lam + h))
        down = float(trans.totheta(lam - h))
        jacobian[i] = (up - down) / (2.0 * h)
        roundtrip[i] = 0.5 * (up + down)
    if np.any(jacobian > 0.0) and np.any(jacobian < 0.0):
        raise InvalidTransformationError(
            "totheta is not monotone on the grid: its derivative changes sign"
        )
    mismatch = np.max(np.abs(roundtrip - grid) / np.maximum(1.0, np.abs(grid)))
    if mismatch > 1e-6:
        raise InvalidTransformationError(
            f"fromtheta is not the inverse of totheta on the grid "
            f"(max relative mismatch {mismatch:.2e})"
        )
    return transparam, pdf * np.abs(jacobian)


def compute_pdf_and_cdf(
    mp: MarginalPosterior, transformation=None, grid=None
) -> PdfCdfTable:
    """Tabulate the marginal density and cumulative distribution.

    The default grid spans the support points extended by half their
    range on each side (1000 equally spaced points); pass ``grid`` to
    override.  The cumulative column is the left Riemann sum of the
    density with a zero first increment, so cdf[0] is exactly 0.  With a
    ``transformation``, columns for the reporting-scale parameter and its
    Jacobian-corrected density are added; the Jacobian is a central
    difference of ``totheta``.
    """
    grid = _default_grid(mp) if grid is None else np.asarray(grid, dtype=float)
    logpdf = interpolate_marginal(mp)
    pdf = np.exp(np.asarray(logpdf(grid), dtype=float))
    increments = np.concatenate(([0.0], np.diff(grid)))
    cdf = np.cumsum(pdf * increments)
    if transformation is None:
        return PdfCdfTable(theta=grid, pdf=pdf, cdf=cdf)
    transparam, pdf_trans = _transform_columns(transformation, grid, pdf)
    return PdfCdfTable(
        theta=grid, pdf=pdf, cdf=cdf, transparam=transparam, pdf_transparam=pdf_trans
    )


def compute_quantiles(
    mp: MarginalPosterior, probs, transformation=None, grid=None
) -> np.ndarray:
    """Posterior quantiles as the smallest grid values reaching each level.

    For each probability alpha the returned value is min{x : F(x) >=
    alpha} over the density grid.  With a ``transformation`` the
    quadrature-scale quantiles are mapped through ``fromtheta``, which
    commutes with the quantile for monotone increasing maps.
    """
    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    if np.any((probs <= 0.0) | (probs >= 1.0)):
        raise ValueError(f"probabilities must lie strictly inside (0, 1): {probs}")
    table = compute_pdf_and_cdf(mp, grid=grid)
    indices = np.searchsorted(table.cdf, probs, side="left")
    if np.any(indices >= table.cdf.size):
        raise ValueError(
            f"cumulative mass on the grid tops out at {table.cdf[-1]:.6f}, "
            f"below a requested probability; supply a wider grid"
        )
    quantiles = table.theta[indices]
    if transformation is not None:
        trans = _as_transformation(transformation)
        quantiles = np.array([float(trans.fromtheta(q)) for q in quantiles])
    return quantiles


@dataclass(frozen=True)
class FitSummary:
    """Per-coordinate summary statistics plus the fit's global quantities."""

    table: pd.DataFrame
    lognormconst: float
    mode: np.ndarray
    hessian: np.ndarray
    covariance: np.ndarray
    cholesky: np.ndarray

    def to_json(self, indent: int = 2) -> str:
        payload = {
            "lognormconst": self.lognormconst,
            "mode": self.mode.tolist(),
            "hessian": self.hessian.tolist(),
            "covariance": self.covariance.tolist(),
            "cholesky": self.cholesky.tolist(),
            "table": {
                name: {col: float(val) for col, val in row.items()}
                for name, row in self.table.to_dict(orient="index").items()
            },
        }
        return json.dumps(payload, sort_keys=True, indent=indent)

    def __str__(self) -> str:
        lines = [
            "posterior summary",
            self.table.to_string(float_format=lambda v: f"{v:.6g}"),
            f"log normalizing constant: {self.lognormconst:.6f}",
            f"mode: {np.array2string(self.mode, precision=6)}",
        ]
        return "\n".join(lines)


def summarize(fit: AGHQFit) -> FitSummary:
    """Moments and quantiles for every coordinate of a fit.

    Means and standard deviations come from quadrature moments; the
    median and the 2.5%/97.5% quantiles come from each marginal's
    cumulative table; the mode is the optimizer's.
    """
    post = fit.normalized_posterior
    mode = np.atleast_1d(fit.optresults.mode)
    rows = []
    for t in range(mode.size):
        mean = compute_moment(post, lambda th: th[t])
        variance = compute_moment(post, lambda th: (th[t] - mean) ** 2)
        median, lower, upper = compute_quantiles(fit.marginals[t], [0.5, 0.025, 0.975])
        rows.append(
            {
                "mean": mean,
                "median": float(median),
                "mode": float(mode[t]),
                "sd": math.sqrt(max(variance, 0.0)),
                "2.5%": float(lower),
                "97.5%": float(upper),
            }
        )
    table = pd.DataFrame(rows, index=[f"theta{t + 1}" for t in range(mode.size)])
    lower_chol = post.grid.cholesky_lower
    return FitSummary(
        table=table,
        lognormconst=post.lognormconst,
        mode=mode,
        hessian=fit.optresults.hessian,
        covariance=lower_chol @ lower_chol.T,
        cholesky=lower_chol,
    )
