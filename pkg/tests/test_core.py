import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renewal_sir.core import (
    Grid,
    GridFunction,
    History,
    check_bv_composition_inequality,
    check_bv_product_inequality,
    check_bv_quotient_inequality,
    check_bv_shift_inequality,
    check_bv_time_integral_inequality,
    check_incubo_inequality,
    l1_norm,
    total_variation,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def random_function(rng, n=41, dx=0.05, jumps=True):
    right = rng.normal(size=n)
    left = right.copy()
    if jumps:
        k = rng.integers(1, n - 1, size=3)
        left[k] += rng.normal(size=3)
    return GridFunction(right, dx, left)


def test_grid_rejects_misaligned_interface():
    with pytest.raises(ValueError, match="not aligned"):
        Grid(10.0, 4, 1.0, interfaces=(2.3,))


def test_grid_nodes_and_steps():
    grid = Grid(10.0, 4, 2.0, interfaces=(2.5, 5.0))
    assert grid.n_cells == 40 and grid.n_steps == 8
    assert grid.interface_nodes == (10, 20)
    assert grid.segment_nodes == (0, 10, 20, 40)
    assert grid.dt == grid.dx == 0.25
    assert grid.refined(2).n_cells == 80


def test_grid_rejects_unordered_bounds():
    with pytest.raises(ValueError, match="increasing"):
        Grid(10.0, 4, 1.0, interfaces=(5.0, 2.5))


def test_indicator_norms():
    # indicator of [1, 2] on a mesh of width 0.25 with sharp jumps
    x = np.arange(0, 4.001, 0.25)
    right = ((x >= 1) & (x < 2)).astype(float)
    left = ((x > 1) & (x <= 2)).astype(float)
    f = GridFunction(right, 0.25, left)
    assert l1_norm(f) == pytest.approx(1.0, abs=1e-15)
    assert total_variation(f) == pytest.approx(2.0, abs=1e-15)
    assert f.linf() == 1.0
    assert list(f.jump_nodes()) == [4, 8]


def test_evaluation_is_piecewise_linear():
    f = GridFunction([0.0, 1.0, 3.0], 0.5)
    assert f(np.array([0.25, 0.75])) == pytest.approx([0.5, 2.0])
    assert f(np.array([-0.1, 1.2])) == pytest.approx([0.0, 0.0])


@given(st.lists(finite, min_size=2, max_size=30), finite)
def test_tv_invariances(values, c):
    f = GridFunction(values, 0.1)
    assert total_variation(f.map(lambda v: 0 * v + c)) == 0.0
    assert total_variation(f + c) == pytest.approx(total_variation(f), abs=1e-9)
    assert total_variation(-f) == total_variation(f)


@given(st.lists(finite, min_size=2, max_size=20), st.integers(2, 5))
def test_norms_monotone_under_refinement_of_piecewise_constants(values, factor):
    # piecewise-constant cells encoded with jumps at every node
    values = np.asarray(values)
    coarse = GridFunction(np.append(values, 0.0), 1.0, np.concatenate([[0.0], values]))
    fine_vals = np.repeat(values, factor)
    fine = GridFunction(np.append(fine_vals, 0.0), 1.0 / factor, np.concatenate([[0.0], fine_vals]))
    assert l1_norm(fine) == pytest.approx(l1_norm(coarse), rel=1e-12, abs=1e-12)
    assert total_variation(fine) == pytest.approx(total_variation(coarse), rel=1e-12, abs=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_bv_inequalities_on_random_functions(seed):
    rng = np.random.default_rng(seed)
    u, w = random_function(rng), random_function(rng)
    assert check_bv_product_inequality(u, w).holds
    positive = w.map(lambda v: np.abs(v) + 0.5)
    assert check_bv_quotient_inequality(u, positive, 0.5).holds
    comps = [random_function(rng) for _ in range(3)]
    report = check_bv_composition_inequality(lambda a, b, c: np.sin(a) - 0.5 * b + np.tanh(c), 1.0, comps)
    assert report.holds
    family = [random_function(rng) for _ in range(6)]
    assert check_bv_time_integral_inequality(family, 0.1).holds
    shifts = rng.integers(0, 5, size=u.n_nodes)
    assert check_bv_shift_inequality(u, shifts).holds
    assert check_incubo_inequality(rng.normal(size=(15, 15)), 2.0).holds


def test_quotient_rejects_small_denominator():
    u = GridFunction([1.0, 2.0], 1.0)
    with pytest.raises(ValueError):
        check_bv_quotient_inequality(u, GridFunction([0.1, 1.0], 1.0), 0.5)


def test_history_norms_match_snapshots():
    rng = np.random.default_rng(3)
    right = rng.normal(size=(4, 9))
    left = right + (rng.random((4, 9)) < 0.2)
    h = History(np.arange(4) * 0.1, 0.1, right, left)
    for n in range(4):
        f = h.at(n)
        assert h.l1()[n] == pytest.approx(f.l1())
        assert h.tv()[n] == pytest.approx(f.tv())
        assert h.linf()[n] == pytest.approx(f.linf())
    joined = History.concatenate([h.slice(0, 3), h.slice(2)])
    assert np.array_equal(joined.right, h.right)
