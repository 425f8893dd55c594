"""Gauss-Hermite quadrature rules under the probabilist ("He") convention.

The k-point rule places its nodes at the roots of the degree-k Hermite
polynomial He_k and attaches the weights

    w_j = k! / (He_{k+1}(x_j)^2 * phi(x_j)),

where phi is the standard normal density.  With this convention

    sum_j f(x_j) w_j  ~=  integral of f over the real line,

and the approximation is exact whenever f(x) = p(x) * phi(x) for a
polynomial p of degree at most 2k - 1.

Nodes and weights are computed by the Golub-Welsch method: the symmetric
tridiagonal Jacobi matrix of the He recurrence (zero diagonal,
off-diagonal sqrt(1), ..., sqrt(k-1)) is diagonalized, its eigenvalues
are the nodes, and the squared first components of the normalized
eigenvectors are the weights of the unit-mass Gaussian measure.
Dividing those by phi(x_j) recovers the w_j above.  No Newton iteration
on polynomial roots is involved, so the construction needs no starting
guesses and is robust for moderate k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .exceptions import EvaluationError, GridTooLargeError

__all__ = [
    "MAX_GRID_POINTS",
    "QuadRule1D",
    "QuadRuleProduct",
    "ghq_rule_1d",
    "hermite_eval",
    "product_rule",
    "quadrature",
]

MAX_GRID_POINTS = 10_000_000

# eigenvalues of the Jacobi matrix carry ~1e-16 noise at the origin
_NODE_SNAP = 1e-13


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _norm_pdf(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadRule1D:
    """A k-point rule: strictly ascending nodes and positive weights."""

    k: int
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class QuadRuleProduct:
    """Tensor-product rule over ``dim`` coordinates with k nodes per coordinate.

    ``nodes`` has k**dim rows ordered so that the first coordinate cycles
    fastest; each row's weight is the product of the matching 1D weights.
    """

    dim: int
    k_per_dim: int
    nodes: np.ndarray
    weights: np.ndarray


def hermite_eval(k: int, x):
    """Evaluate the probabilist Hermite polynomial He_k at x.

    Uses the three-term recurrence He_{j+1}(x) = x He_j(x) - j He_{j-1}(x)
    with He_0 = 1 and He_1 = x.  ``x`` may be a scalar or an array.
    """
    if k < 0:
        raise ValueError(f"polynomial degree must be nonnegative, got {k}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for j in range(1, k):
        prev, cur = cur, x * cur - j * prev
    return cur if cur.ndim else float(cur)


def ghq_rule_1d(k: int) -> QuadRule1D:
    """Build the k-point Gauss-Hermite rule.

    Parameters
    ----------
    k : int
        Number of nodes, at least 1.

    Returns
    -------
    QuadRule1D
        Nodes ascending and exactly symmetric about 0 (a node sits at 0
        if and only if k is odd); weights positive and symmetric.
    """
    if k < 1:
        raise ValueError(f"node count must be at least 1, got {k}")
    if k == 1:
        nodes = np.array([0.0])
        gauss_weights = np.array([1.0])
    else:
        nodes, vectors = eigh_tridiagonal(np.zeros(k), np.sqrt(np.arange(1.0, k)))
        gauss_weights = vectors[0] ** 2
        # enforce the exact +/- symmetry the eigensolver only approximates
        nodes = 0.5 * (nodes - nodes[::-1])
        gauss_weights = 0.5 * (gauss_weights + gauss_weights[::-1])
        nodes[np.abs(nodes) < _NODE_SNAP] = 0.0
    weights = gauss_weights / _norm_pdf(nodes)
    return QuadRule1D(k=k, nodes=_readonly(nodes), weights=_readonly(weights))


def product_rule(d: int, k: int, max_points: int = MAX_GRID_POINTS) -> QuadRuleProduct:
    """Build the d-dimensional tensor product of the k-point rule.

    Row ordering is lexicographic with the first coordinate cycling
    fastest, so for d=2, k=3 the first three rows share their second
    coordinate while the first coordinate runs over all three nodes.

    Raises
    ------
    GridTooLargeError
        If k**d exceeds ``max_points`` (default 10**7).
    """
    if d < 1:
        raise ValueError(f"dimension must be at least 1, got {d}")
    if k < 1:
        raise ValueError(f"node count must be at least 1, got {k}")
    m = k**d
    if m > max_points:
        raise GridTooLargeError(
            f"product grid needs k**d = {k}**{d} = {m} nodes, "
            f"exceeding the {max_points}-point cap"
        )
    rule = ghq_rule_1d(k)
    nodes = np.empty((m, d))
    weights = np.ones(m)
    for c in range(d):
        pattern = np.tile(np.repeat(rule.nodes, k**c), k ** (d - 1 - c))
        nodes[:, c] = pattern
        weights *= np.tile(np.repeat(rule.weights, k**c), k ** (d - 1 - c))
    return QuadRuleProduct(
        dim=d, k_per_dim=k, nodes=_readonly(nodes), weights=_readonly(weights)
    )


def quadrature(f: Callable, rule: Union[QuadRule1D, QuadRuleProduct]) -> float:
    """Return sum_j f(x_j) w_j over the rule's nodes.

    For a 1D rule ``f`` receives scalars; for a product rule it receives
    one length-d array per node.  Nodes are visited in storage order.

    Raises
    ------
    EvaluationError
        If ``f`` returns a non-finite value, reporting the node index.
    """
    total = 0.0
    for j, (x, w) in enumerate(zip(rule.nodes, rule.weights)):
        val = float(f(x))
        if not math.isfinite(val):
            raise EvaluationError(
                f"integrand returned a non-finite value at node {j} (x = {x})"
            )
        total += val * w
    return total
