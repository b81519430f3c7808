import itertools
import math

import numpy as np
import pytest

from beamuq.errors import ConfigurationError, IndexSetStructureError
from beamuq.sparse_grid import (
    NodeFamily,
    assemble_rule,
    combination_coeffs,
    growth,
    index_set,
    integrate,
    interpolate,
    is_downward_closed,
    node_key,
    univariate_nodes,
    univariate_weights,
)
from beamuq.stochastic_space import RandomSpace


# ---------------------------------------------------------------------------
# growth rules


def test_nested_growth():
    assert growth("nested", 0) == 0
    assert growth("nested", 1) == 2
    assert growth("nested", 3) == 8


def test_linear_growth():
    assert growth("linear", 4) == 4


def test_node_count_at_nested_level_two():
    assert NodeFamily("clenshaw-curtis", "nested").node_count(2) == 5


def test_gauss_rejects_nested():
    with pytest.raises(ConfigurationError):
        NodeFamily("gauss-legendre", "nested")


# ---------------------------------------------------------------------------
# index sets


def test_total_degree_small():
    iset = index_set("total-degree", 1, 2)
    assert set(iset.indices) == {(0, 0), (1, 0), (0, 1)}


def test_hyperbolic_cross_matches_brute_force():
    iset = index_set("hyperbolic-cross", 3, 2)
    brute = {j for j in itertools.product(range(4), repeat=2)
             if (j[0] + 1) * (j[1] + 1) <= 4}
    assert set(iset.indices) == brute
    assert set(iset.indices) == {(0, 0), (1, 0), (0, 1), (2, 0), (0, 2),
                                 (3, 0), (0, 3), (1, 1)}


def test_full_tensor_1d():
    assert set(index_set("full-tensor", 2, 1).indices) == {(0,), (1,), (2,)}


@pytest.mark.parametrize("kind", ["total-degree", "hyperbolic-cross", "full-tensor"])
@pytest.mark.parametrize("dim,level", [(1, 4), (2, 3), (3, 4), (5, 3)])
def test_index_sets_downward_closed(kind, dim, level):
    assert is_downward_closed(index_set(kind, level, dim).indices)


# ---------------------------------------------------------------------------
# combination coefficients


def _brute_coeff(indices, j):
    members = set(indices)
    dim = len(j)
    total = 0
    for shift in itertools.product((0, 1), repeat=dim):
        if tuple(a + b for a, b in zip(j, shift)) in members:
            total += (-1) ** sum(shift)
    return total


def test_td_level1_coeffs():
    coeffs = combination_coeffs(index_set("total-degree", 1, 2))
    assert coeffs == {(0, 0): -1, (1, 0): 1, (0, 1): 1}


def test_full_tensor_coeffs_corner_only():
    for dim, level in [(2, 2), (3, 1)]:
        coeffs = combination_coeffs(index_set("full-tensor", level, dim))
        assert coeffs == {(level,) * dim: 1}


def test_td_1d_level2():
    assert combination_coeffs(index_set("total-degree", 2, 1)) == {(2,): 1}


def test_coeffs_match_brute_force():
    iset = index_set("total-degree", 3, 3)
    coeffs = combination_coeffs(iset)
    for j in iset.indices:
        assert coeffs.get(j, 0) == _brute_coeff(iset.indices, j)


def test_rejects_non_downward_closed():
    with pytest.raises(IndexSetStructureError):
        combination_coeffs(((0, 0), (2, 0)))


# ---------------------------------------------------------------------------
# univariate nodes and weights


def test_cc_three_nodes():
    assert np.allclose(univariate_nodes("clenshaw-curtis", 3), [-1.0, 0.0, 1.0])
    assert univariate_nodes("clenshaw-curtis", 3)[1] == 0.0


def test_cc_single_node_is_midpoint():
    assert univariate_nodes("clenshaw-curtis", 1) == pytest.approx([0.0])


def test_cc_five_nodes():
    expected = [-1.0, -np.sqrt(2) / 2, 0.0, np.sqrt(2) / 2, 1.0]
    assert np.allclose(univariate_nodes("clenshaw-curtis", 5), expected)


def test_cc_weights_three_point():
    w = univariate_weights("clenshaw-curtis", 3)
    assert np.allclose(w, [1 / 6, 2 / 3, 1 / 6], atol=1e-14)


def test_single_node_weight():
    assert univariate_weights("clenshaw-curtis", 1) == pytest.approx([1.0])


def test_cc_five_integrates_quartic():
    nodes = univariate_nodes("clenshaw-curtis", 5)
    w = univariate_weights("clenshaw-curtis", 5)
    # integral of x^4 * (1/2) over [-1, 1] = 1/5
    assert np.sum(w * nodes**4) == pytest.approx(0.2, abs=1e-14)


@pytest.mark.parametrize("family,m", [("clenshaw-curtis", 9), ("gauss-legendre", 6)])
def test_weights_by_dense_moment_oracle(family, m):
    nodes = univariate_nodes(family, m)
    w = univariate_weights(family, m)
    exactness = m - 1 if family == "clenshaw-curtis" else 2 * m - 1
    for d in range(exactness + 1):
        exact = 0.0 if d % 2 else 1.0 / (d + 1)
        assert np.sum(w * nodes**d) == pytest.approx(exact, abs=1e-13)


def test_cc_weights_stable_to_129():
    w = univariate_weights("clenshaw-curtis", 129)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(w > 0.0)


# ---------------------------------------------------------------------------
# canonical keys and rule assembly


def test_nested_cc_keys_dedup_exactly():
    # even-index level-j nodes reduce to the level-(j-1) keys
    assert node_key("clenshaw-curtis", 5, 2) == node_key("clenshaw-curtis", 3, 1)
    assert node_key("clenshaw-curtis", 9, 4) == node_key("clenshaw-curtis", 3, 1)
    assert node_key("clenshaw-curtis", 1, 0) == node_key("clenshaw-curtis", 3, 1)
    assert node_key("clenshaw-curtis", 3, 0) != node_key("clenshaw-curtis", 3, 2)


@pytest.fixture
def unit_square():
    return RandomSpace(bounds=((0.8, 1.0), (0.8, 1.0)))


def test_cross_pattern_rule(unit_square):
    rule = assemble_rule(unit_square, "total-degree", 1)
    assert rule.node_count == 5
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
    center = np.array([0.9, 0.9])
    assert any(np.allclose(pt, center) for pt in rule.points)


def test_1d_smolyak_collapses_to_univariate():
    space = RandomSpace(bounds=((-1.0, 1.0),))
    rule = assemble_rule(space, "total-degree", 3)
    nodes = univariate_nodes("clenshaw-curtis", 9)
    weights = univariate_weights("clenshaw-curtis", 9)
    assert rule.node_count == 9
    assert np.allclose(np.sort(rule.points[:, 0]), nodes, atol=1e-15)
    order = np.argsort(rule.points[:, 0])
    assert np.allclose(rule.weights[order], weights, atol=1e-14)


def _brute_force_tensor_rule(space, level, family="clenshaw-curtis", growth_rule="nested"):
    fam = NodeFamily(family, growth_rule)
    m = fam.node_count(level)
    nodes = univariate_nodes(family, m)
    weights = univariate_weights(family, m)
    pts, w = [], []
    for combo in itertools.product(range(m), repeat=space.dim):
        ref = np.array([nodes[k] for k in combo])
        pts.append(space.map_from_reference(ref))
        w.append(math.prod(weights[k] for k in combo))
    return np.array(pts), np.array(w)


def test_full_tensor_kind_equals_direct_tensor(unit_square):
    rule = assemble_rule(unit_square, "full-tensor", 2)
    pts, w = _brute_force_tensor_rule(unit_square, 2)
    assert rule.node_count == len(pts)
    # order-independent node-for-node, weight-for-weight comparison
    key_a = {tuple(np.round(p, 13)): wt for p, wt in zip(rule.points, rule.weights)}
    key_b = {tuple(np.round(p, 13)): wt for p, wt in zip(pts, w)}
    assert key_a.keys() == key_b.keys()
    for k in key_a:
        assert key_a[k] == pytest.approx(key_b[k], abs=1e-13)


@pytest.mark.parametrize("level", [1, 2, 3])
def test_nested_levels_are_embedded(level):
    space = RandomSpace(bounds=((0.0, 1.0), (0.0, 1.0)))
    coarse = assemble_rule(space, "total-degree", level)
    fine = assemble_rule(space, "total-degree", level + 1)
    assert set(coarse.keys) <= set(fine.keys)


def test_weights_sum_to_one_many_rules():
    for dim in (1, 2, 3):
        space = RandomSpace(bounds=tuple((0.0, 1.0) for _ in range(dim)))
        for kind in ("total-degree", "hyperbolic-cross"):
            for level in range(4):
                rule = assemble_rule(space, kind, level)
                assert abs(rule.weights.sum() - 1.0) <= 1e-12


# ---------------------------------------------------------------------------
# integration


def test_integrate_constant():
    space = RandomSpace(bounds=((0.0, 1.0), (0.0, 1.0)))
    rule = assemble_rule(space, "total-degree", 2)
    assert integrate(rule, lambda y: 1.0) == pytest.approx(1.0, abs=1e-12)


def test_integrate_linear_exact():
    space = RandomSpace(bounds=((0.8, 1.0), (0.8, 1.0)))
    rule = assemble_rule(space, "total-degree", 1)
    assert integrate(rule, lambda y: y[0]) == pytest.approx(0.9, abs=1e-12)


def test_integrate_product_moment():
    space = RandomSpace(bounds=((0.0, 1.0),) * 3)
    rule = assemble_rule(space, "total-degree", 2)
    # full-tensor oracle on the same integrand
    exact = (1.0 / 3.0) ** 3
    got = integrate(rule, lambda y: y[0] ** 2 * y[1] ** 2 * y[2] ** 2)
    # TD level 2 does not carry the full mixed degree; compare against the
    # dense tensor rule instead of the analytic moment
    pts, w = _brute_force_tensor_rule(space, 2)
    dense = float(np.sum(w * np.prod(pts**2, axis=1)))
    ft = assemble_rule(space, "full-tensor", 2)
    got_ft = integrate(ft, lambda y: y[0] ** 2 * y[1] ** 2 * y[2] ** 2)
    assert got_ft == pytest.approx(dense, abs=1e-13)
    assert got_ft == pytest.approx(exact, abs=1e-13)
    assert abs(got - exact) < 0.05  # sparse level-2 is approximate here


def test_integrate_univariate_monomials_exact_to_growth_degree():
    for level in (1, 2, 3):
        space = RandomSpace(bounds=((0.2, 1.2), (0.2, 1.2)))
        rule = assemble_rule(space, "total-degree", level)
        p = growth("nested", level)
        a, b = 0.2, 1.2
        for d in range(p + 1):
            exact = (b ** (d + 1) - a ** (d + 1)) / ((d + 1) * (b - a))
            assert integrate(rule, lambda y, d=d: y[0] ** d) == pytest.approx(
                exact, abs=1e-12)


def test_integration_cache_reuse():
    space = RandomSpace(bounds=((0.0, 1.0), (0.0, 1.0)))
    cache = {}
    calls = []

    def f(y):
        calls.append(tuple(y))
        return y[0] + y[1]

    coarse = assemble_rule(space, "total-degree", 1)
    fine = assemble_rule(space, "total-degree", 2)
    integrate(coarse, f, cache=cache)
    n_coarse = len(calls)
    integrate(fine, f, cache=cache)
    assert n_coarse == coarse.node_count
    assert len(calls) == fine.node_count  # all coarse nodes reused


# ---------------------------------------------------------------------------
# interpolation


def test_interpolate_constant():
    space = RandomSpace(bounds=((0.0, 2.0), (0.0, 2.0)))
    iset = index_set("total-degree", 2, 2)
    val = interpolate(space, iset, "clenshaw-curtis", "nested",
                      lambda y: 3.5, np.array([0.3, 1.7]))
    assert val == pytest.approx(3.5, abs=1e-12)


def test_interpolate_linear_reproduction():
    space = RandomSpace(bounds=((0.0, 2.0), (0.0, 2.0)))
    iset = index_set("total-degree", 1, 2)
    val = interpolate(space, iset, "clenshaw-curtis", "nested",
                      lambda y: y[1], np.array([0.3, 1.7]))
    assert val == pytest.approx(1.7, abs=1e-12)


@pytest.mark.parametrize("level,degree", [(2, 4), (3, 8)])
def test_interpolate_univariate_polynomial_reproduction(level, degree):
    space = RandomSpace(bounds=((0.0, 1.0), (0.0, 1.0)))
    iset = index_set("total-degree", level, 2)

    def f(y):
        return (2.0 * y[0] - 1.0) ** degree

    for y_eval in (np.array([0.123, 0.5]), np.array([0.77, 0.2])):
        val = interpolate(space, iset, "clenshaw-curtis", "nested", f, y_eval)
        assert val == pytest.approx(f(y_eval), abs=1e-12)


def test_interpolation_property_at_nodes():
    space = RandomSpace(bounds=((0.0, 1.0), (0.0, 1.0)))
    iset = index_set("total-degree", 2, 2)
    rule = assemble_rule(space, "total-degree", 2)

    def f(y):
        return np.sin(3.0 * y[0]) + np.cos(2.0 * y[1])

    for pt in rule.points[::5]:
        val = interpolate(space, iset, "clenshaw-curtis", "nested", f, pt)
        assert val == pytest.approx(f(pt), abs=1e-12)


def test_spectral_vs_algebraic_contrast():
    """Sparse quadrature error on an analytic integrand decays faster than any
    fixed algebraic rate: the log-log slope steepens from the first to the
    last level pair."""
    space = RandomSpace(bounds=((0.0, 1.0),) * 3)
    exact = (np.e - 1.0) ** 3

    def f(y):
        return np.exp(np.sum(y))

    errors, etas = [], []
    for level in range(1, 6):
        rule = assemble_rule(space, "total-degree", level)
        errors.append(abs(integrate(rule, f) - exact) / exact)
        etas.append(rule.node_count)
    slopes = [np.log(errors[i + 1] / errors[i]) / np.log(etas[i + 1] / etas[i])
              for i in range(len(errors) - 1)]
    assert slopes[-1] < slopes[0] < -1.0
    assert errors[-1] < 1e-9
