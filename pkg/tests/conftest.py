"""Shared fixtures: small posterior bundles with known normalizing constants."""

import math

import numpy as np
import pytest
from scipy.special import gammaln

from aghq import ObjectiveBundle

# ten Poisson(5)-like counts; the posterior of the rate under an Exp(1)
# prior is then Gamma(sum + 1, n + 1) with every summary known in closed form
COUNTS = np.array([5, 6, 3, 5, 7, 4, 4, 5, 4, 5], dtype=float)


def make_poisson_gamma_bundle(counts=COUNTS):
    """Log posterior of a Poisson rate on the log scale (eta = log rate)."""
    counts = np.asarray(counts, dtype=float)
    n = counts.size
    ysum = float(counts.sum())
    lgamma_y = float(gammaln(counts + 1.0).sum())

    def fn(theta):
        eta = theta[0]
        return ysum * eta - (n + 1.0) * math.exp(eta) - lgamma_y + eta

    return ObjectiveBundle(fn=fn, dim=1)


def poisson_gamma_lognormconst(counts=COUNTS):
    counts = np.asarray(counts, dtype=float)
    shape = float(counts.sum()) + 1.0
    rate = counts.size + 1.0
    return float(gammaln(shape)) - shape * math.log(rate) - float(
        gammaln(counts + 1.0).sum()
    )


def make_gaussian_bundle(precision, mean):
    """Quadratic log density with analytic derivatives; normalizes to
    (d/2) log(2 pi) - log det(precision) / 2."""
    precision = np.atleast_2d(np.asarray(precision, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))

    return ObjectiveBundle(
        fn=lambda th: -0.5 * float((th - mean) @ precision @ (th - mean)),
        gr=lambda th: -(precision @ (th - mean)),
        he=lambda th: -precision,
        dim=mean.size,
    )


def gaussian_lognormconst(precision):
    precision = np.atleast_2d(np.asarray(precision, dtype=float))
    d = precision.shape[0]
    _, logdet = np.linalg.slogdet(precision)
    return 0.5 * d * math.log(2.0 * math.pi) - 0.5 * logdet


def random_spd(rng, d):
    a = rng.standard_normal((d, d))
    return a @ a.T + d * np.eye(d)


@pytest.fixture
def poisson_bundle():
    return make_poisson_gamma_bundle()


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)
