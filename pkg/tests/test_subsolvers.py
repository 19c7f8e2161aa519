import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adaptive_pl.errors import DimensionMismatch, NonMonotoneDemand
from adaptive_pl.subsolvers import (
    BISECTION_TOL,
    BoxBlock,
    CappedSimplexBlock,
    ElasticDemandBlock,
    SimplexBlock,
    box_l1_linearized_min,
    capped_simplex_linearized_min,
    elastic_demand_block_min,
    simplex_linearized_min,
)

finite = st.floats(-100, 100, allow_nan=False)
gradients = arrays(float, st.integers(1, 8), elements=finite)


def test_simplex_examples():
    y, obj = simplex_linearized_min([3.0, 1.0, 2.0], 1.0)
    assert np.array_equal(y, [0, 1, 0]) and obj == 1.0
    y, _ = simplex_linearized_min([5.0, 5.0, 5.0])
    assert np.array_equal(y, [1, 0, 0])
    y, obj = simplex_linearized_min([2.0, -1.0], 3.0)
    assert np.array_equal(y, [0, 3]) and obj == -3.0


def test_capped_simplex_examples():
    y, obj = capped_simplex_linearized_min([1.0, -2.0, 0.0], 2.0)
    assert np.array_equal(y, [0, 2, 0]) and obj == -4.0
    y, obj = capped_simplex_linearized_min([1.0, 2.0, 3.0], 7.0)
    assert np.array_equal(y, [0, 0, 0]) and obj == 0.0


def test_box_l1_examples():
    assert box_l1_linearized_min([1.0], [-1.0], [1.0], [0.0])[0][0] == -1.0
    y, obj = box_l1_linearized_min([1.0], [-1.0], [1.0], [2.0])
    assert y[0] == 0.0 and obj == 0.0
    # zero is not a candidate when it lies outside the box
    y, obj = box_l1_linearized_min([1.0], [0.5], [2.0], [1.0])
    assert y[0] == 0.5 and obj == pytest.approx(1.0)


def test_diameters():
    assert SimplexBlock(4, 2.0).diameter == pytest.approx(2 * np.sqrt(2))
    assert CappedSimplexBlock(3, 1.5).diameter == pytest.approx(1.5 * np.sqrt(2))
    assert BoxBlock([0, 0], [3, 4]).diameter == pytest.approx(5.0)


@settings(max_examples=100, deadline=None)
@given(g=gradients, seed=st.integers(0, 2**32 - 1), scale=st.floats(0.1, 10))
def test_simplex_beats_random_points_and_vertices(g, seed, scale):
    block = SimplexBlock(g.size, scale)
    y, obj = block.solve_linearized(g)
    assert block.contains(y)
    assert obj == pytest.approx(g @ y, abs=1e-10)
    z = scale * np.random.default_rng(seed).dirichlet(np.ones(g.size), size=1000)
    assert np.all(obj <= z @ g + 1e-10)
    assert obj <= (block.vertices() @ g).min() + 1e-12


@settings(max_examples=100, deadline=None)
@given(g=gradients, seed=st.integers(0, 2**32 - 1), cap=st.floats(0.1, 10))
def test_capped_simplex_beats_random_points_and_vertices(g, seed, cap):
    block = CappedSimplexBlock(g.size, cap)
    y, obj = block.solve_linearized(g)
    assert block.contains(y) and block.contains(np.zeros(g.size))
    rng = np.random.default_rng(seed)
    z = cap * rng.dirichlet(np.ones(g.size + 1), size=1000)[:, :-1]
    assert np.all(obj <= z @ g + 1e-10)
    assert obj <= (block.vertices() @ g).min() + 1e-12


@settings(max_examples=100, deadline=None)
@given(
    g=arrays(float, 3, elements=finite),
    w=arrays(float, 3, elements=st.floats(0, 50)),
    lo=arrays(float, 3, elements=st.floats(-5, 5)),
    width=arrays(float, 3, elements=st.floats(0, 5)),
)
def test_box_l1_matches_grid(g, w, lo, width):
    hi = lo + width
    block = BoxBlock(lo, hi, w)
    y, obj = block.solve_linearized(g)
    assert block.contains(y)
    assert obj == pytest.approx(g @ y + block.h_value(y), abs=1e-10)
    for j in range(3):
        grid = np.linspace(lo[j], hi[j], 10_000)
        grid_best = np.min(g[j] * grid + w[j] * np.abs(grid))
        assert g[j] * y[j] + w[j] * abs(y[j]) <= grid_best + 1e-8


def test_box_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        BoxBlock([1.0], [0.0])
    with pytest.raises(ValueError):
        BoxBlock([0.0], [1.0], weights=[-1.0])


# -- elastic demand -------------------------------------------------------------


def _demand_block(n_paths=2, gamma=5.0):
    return ElasticDemandBlock(n_paths, lambda v: 10.0 - v, gamma, sigma=lambda v: 10.0 * v - 0.5 * v * v)


@pytest.mark.parametrize(
    "lam, v_expected",
    [(12.0, 0.0), (4.0, 5.0), (7.0, 3.0)],
    ids=["no-demand", "demand-at-cap", "interior-demand"],
)
def test_elastic_demand_cases(lam, v_expected):
    block = _demand_block()
    u, v, obj = elastic_demand_block_min([lam + 1.0, lam], block)
    assert v == pytest.approx(v_expected, abs=1e-10)
    assert np.array_equal(u, [0.0, v])
    assert abs(block.tau(v) - lam) <= BISECTION_TOL or v in (0.0, 5.0)
    assert obj == pytest.approx(lam * v - block.sigma(v), abs=1e-10)


def test_elastic_demand_ties_pick_lowest_path():
    u, v, _ = elastic_demand_block_min([7.0, 7.0, 9.0], _demand_block(3))
    assert np.array_equal(u, [v, 0.0, 0.0])


def test_elastic_demand_rejects_increasing_tau():
    with pytest.raises(NonMonotoneDemand):
        ElasticDemandBlock(1, lambda v: 1.0 + v, 5.0)


def test_elastic_demand_zero_cap_is_origin():
    block = ElasticDemandBlock(2, lambda v: 3.0, 0.0)
    u, v, obj = elastic_demand_block_min([1.0, 2.0], block)
    assert v == 0.0 and not u.any() and obj == 0.0


def test_elastic_demand_dimension_check():
    with pytest.raises(DimensionMismatch):
        elastic_demand_block_min([1.0, 2.0, 3.0], _demand_block(2))


def test_sigma_quadrature_fallback():
    block = ElasticDemandBlock(1, lambda v: 10.0 - v, 5.0)
    assert block.sigma(3.0) == pytest.approx(30.0 - 4.5, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(
    costs=arrays(float, 3, elements=st.floats(0, 20)),
    tau0=st.floats(1, 20),
    slope=st.floats(0.1, 5),
    gamma=st.floats(0.1, 10),
)
def test_elastic_demand_satisfies_pair_equilibrium(costs, tau0, slope, gamma):
    block = ElasticDemandBlock(3, lambda v: tau0 - slope * v, gamma, sigma=lambda v: tau0 * v - 0.5 * slope * v * v)
    u, v, obj = elastic_demand_block_min(costs, block)
    y = np.append(u, v)
    assert block.contains(y)
    lam = costs.min()
    # used paths are cheapest, unused paths are no cheaper
    assert np.all(np.where(u > 0, np.abs(costs - lam), 0.0) <= 1e-8)
    assert np.all(costs - lam >= -1e-8)
    tv = block.tau(v)
    if v <= 0.0:
        assert tv <= lam + 1e-8
    elif v >= gamma:
        assert tv >= lam - 1e-8
    else:
        assert abs(tv - lam) <= 1e-8
    # optimality against random feasible points
    rng = np.random.default_rng(0)
    for _ in range(200):
        vv = rng.uniform(0, gamma)
        uu = vv * rng.dirichlet(np.ones(3))
        assert obj <= costs @ uu - block.sigma(vv) + 1e-9


def test_elastic_block_solve_linearized_folds_demand_gradient():
    block = _demand_block()
    # a demand-coordinate gradient of 1 acts like a cost shift of 1 on every path
    y, obj = block.solve_linearized(np.array([6.0, 8.0, 1.0]))
    assert y[-1] == pytest.approx(3.0, abs=1e-9)
    assert obj == pytest.approx(np.array([6.0, 8.0, 1.0]) @ y + block.h_value(y), abs=1e-10)
