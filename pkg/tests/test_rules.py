"""Gauss-Hermite rule construction, product grids, and plain quadrature."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from aghq import (
    EvaluationError,
    GridTooLargeError,
    ghq_rule_1d,
    hermite_eval,
    product_rule,
    quadrature,
)

# closed forms for the smallest rules (weights in the Lebesgue convention,
# i.e. including the 1/phi(x_j) factor)
K1_WEIGHT = math.sqrt(2.0 * math.pi)
K2_WEIGHT = 0.5 * math.sqrt(2.0 * math.pi) * math.exp(0.5)
K3_EDGE_WEIGHT = math.sqrt(2.0 * math.pi) / 6.0 * math.exp(1.5)
K3_MID_WEIGHT = 2.0 * math.sqrt(2.0 * math.pi) / 3.0


def gaussian_moment(p):
    """E[X^p] for standard normal: double factorial for even p, zero odd."""
    if p % 2 == 1:
        return 0.0
    return float(np.prod(np.arange(p - 1, 0, -2))) if p > 0 else 1.0


class TestHermitePolynomials:
    def test_low_degrees_match_closed_forms(self):
        x = np.linspace(-3.0, 3.0, 13)
        np.testing.assert_allclose(hermite_eval(0, x), np.ones_like(x))
        np.testing.assert_allclose(hermite_eval(1, x), x)
        np.testing.assert_allclose(hermite_eval(2, x), x**2 - 1.0)
        np.testing.assert_allclose(hermite_eval(3, x), x**3 - 3.0 * x)
        np.testing.assert_allclose(hermite_eval(4, x), x**4 - 6.0 * x**2 + 3.0)

    def test_scalar_input_gives_scalar(self):
        assert hermite_eval(2, 2.0) == pytest.approx(3.0)

    def test_negative_degree_rejected(self):
        with pytest.raises(ValueError):
            hermite_eval(-1, 0.0)

    @pytest.mark.parametrize("k", [2, 5, 9])
    def test_nodes_are_roots(self, k):
        """The k-point nodes are exactly the zeros of He_k."""
        rule = ghq_rule_1d(k)
        np.testing.assert_allclose(hermite_eval(k, rule.nodes), 0.0, atol=1e-9)


class TestOneDimensionalRules:
    def test_one_point_rule_is_mode_only(self):
        rule = ghq_rule_1d(1)
        np.testing.assert_array_equal(rule.nodes, [0.0])
        np.testing.assert_allclose(rule.weights, [K1_WEIGHT], rtol=1e-15)

    def test_two_point_rule(self):
        rule = ghq_rule_1d(2)
        np.testing.assert_allclose(rule.nodes, [-1.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(rule.weights, [K2_WEIGHT, K2_WEIGHT], rtol=1e-13)

    def test_three_point_rule(self):
        rule = ghq_rule_1d(3)
        root = math.sqrt(3.0)
        np.testing.assert_allclose(rule.nodes, [-root, 0.0, root], atol=1e-14)
        np.testing.assert_allclose(
            rule.weights,
            [K3_EDGE_WEIGHT, K3_MID_WEIGHT, K3_EDGE_WEIGHT],
            rtol=1e-13,
        )

    @pytest.mark.parametrize("k", range(1, 11))
    def test_symmetry_and_positivity(self, k):
        rule = ghq_rule_1d(k)
        assert rule.nodes.shape == (k,)
        assert np.all(np.diff(rule.nodes) > 0.0) or k == 1
        np.testing.assert_array_equal(rule.nodes, -rule.nodes[::-1])
        np.testing.assert_array_equal(rule.weights, rule.weights[::-1])
        assert np.all(rule.weights > 0.0)

    @pytest.mark.parametrize("k", range(1, 11))
    def test_zero_is_node_exactly_for_odd_k(self, k):
        rule = ghq_rule_1d(k)
        assert (0.0 in rule.nodes) == (k % 2 == 1)

    @pytest.mark.parametrize("k", [2, 3, 4, 6, 8, 10])
    def test_weights_match_hermite_formula(self, k):
        """w_j = k! / (He_{k+1}(x_j)^2 phi(x_j)), independent of the
        eigenvalue construction used to build the rule."""
        rule = ghq_rule_1d(k)
        he_next = hermite_eval(k + 1, rule.nodes)
        expected = math.factorial(k) / (he_next**2 * norm.pdf(rule.nodes))
        np.testing.assert_allclose(rule.weights, expected, rtol=1e-10)

    @pytest.mark.parametrize("k", range(1, 11))
    def test_polynomial_exactness(self, k):
        """Gaussian moments up to degree 2k-1 are integrated exactly."""
        rule = ghq_rule_1d(k)
        for p in range(2 * k):
            value = np.sum(rule.weights * rule.nodes**p * norm.pdf(rule.nodes))
            truth = gaussian_moment(p)
            assert abs(value - truth) <= 1e-8 * max(1.0, abs(truth))

    def test_rejects_nonpositive_k(self):
        with pytest.raises(ValueError):
            ghq_rule_1d(0)


class TestProductRules:
    def test_first_dimension_cycles_fastest(self):
        vals = ghq_rule_1d(3).nodes
        grid = product_rule(2, 3)
        assert grid.nodes.shape == (9, 2)
        np.testing.assert_array_equal(grid.nodes[:, 0], np.tile(vals, 3))
        np.testing.assert_array_equal(grid.nodes[:, 1], np.repeat(vals, 3))

    def test_weights_are_products(self):
        w = ghq_rule_1d(2).weights
        grid = product_rule(3, 2)
        expected = np.array(
            [w[i] * w[j] * w[l] for l in range(2) for j in range(2) for i in range(2)]
        )
        np.testing.assert_allclose(grid.weights, expected, rtol=1e-14)

    def test_dimension_one_matches_base_rule(self):
        base = ghq_rule_1d(5)
        grid = product_rule(1, 5)
        np.testing.assert_array_equal(grid.nodes[:, 0], base.nodes)
        np.testing.assert_array_equal(grid.weights, base.weights)

    def test_too_many_points_rejected(self):
        with pytest.raises(GridTooLargeError, match="10\\*\\*8"):
            product_rule(8, 10)

    def test_custom_cap(self):
        with pytest.raises(GridTooLargeError):
            product_rule(2, 4, max_points=15)
        grid = product_rule(2, 4, max_points=16)
        assert grid.nodes.shape == (16, 2)


class TestQuadrature:
    def test_standard_normal_density_integrates_to_one(self):
        rule = product_rule(2, 5)

        def integrand(x):
            return norm.pdf(x[0]) * norm.pdf(x[1])

        assert quadrature(integrand, rule) == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_second_moment(self):
        # one-dimensional rules hand the integrand bare scalars
        rule = ghq_rule_1d(6)
        value = quadrature(lambda x: x**2 * norm.pdf(x), rule)
        assert value == pytest.approx(1.0, rel=1e-12)

    def test_non_finite_integrand_reported_with_node(self):
        rule = ghq_rule_1d(3)
        with pytest.raises(EvaluationError, match="node"):
            quadrature(lambda x: float("inf") if x > 0 else 1.0, rule)
