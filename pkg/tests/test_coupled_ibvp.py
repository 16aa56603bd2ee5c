import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renewal_sir.core import Grid
from renewal_sir.coupled_ibvp import (
    BlowupError,
    SystemConstants,
    SystemSpec,
    apply_T,
    check_neg_condition,
    check_solution_stability,
    solve_global,
    solve_window,
    total_mass,
)
from renewal_sir.oracles import blowup_case, decay_case, shifted_exact, transport_case


def chain_spec(grid, k=0.5, mu=0.0, from_trace=False):
    """u0 transported with decay mu; u1 fed by k * u0 (source) or by u0's trace (boundary)."""
    nodes = grid.n_cells + 1
    trace = grid.n_cells // 2

    def gamma(times):
        out = {}
        if mu:
            out[(0, 0)] = np.full((times.size, nodes), -mu)
        if not from_trace:
            out[(1, 0)] = np.full((times.size, nodes), k)
        return out

    def beta(i, times, traces):
        if i == 1 and from_trace:
            return traces[0]
        return np.zeros(times.size)

    return SystemSpec(
        n=2,
        nodes=(nodes, nodes),
        dx=grid.dx,
        alpha=lambda right, left: {},
        gamma=gamma,
        beta=beta,
        beta_deps=((), (0,) if from_trace else ()),
        trace_nodes=(trace, None),
        constants=SystemConstants(C_inf=max(mu, k)),
        pos=True,
        neg=True,
    )


def test_beta_may_only_read_earlier_components():
    grid = Grid(4.0, 10, 1.0)
    spec = chain_spec(grid, from_trace=True)
    with pytest.raises(ValueError):
        SystemSpec(2, spec.nodes, spec.dx, spec.alpha, spec.gamma, spec.beta, ((1,), ()), (5, 5))
    with pytest.raises(ValueError):
        SystemSpec(2, spec.nodes, spec.dx, spec.alpha, spec.gamma, spec.beta, ((), (0,)), (None, None))


def test_linear_source_coupling_is_exact():
    # u1(t, x) = k t u0_o(x - t) for x > t, the trapezoid is exact along characteristics
    grid = Grid(6.0, 20, 2.0)
    case = transport_case("ramp")
    u0 = case.initial(grid)
    zero = grid.sample(lambda x: 0 * x)
    sol = solve_global(chain_spec(grid, k=0.5), [u0, zero], 2.0)
    for n, t in enumerate(sol.times):
        exact = shifted_exact(case, grid, float(t))
        assert np.allclose(sol.components[0].right[n], exact.right, atol=1e-13)
        assert np.allclose(sol.components[1].right[n], 0.5 * t * exact.right, atol=1e-12)


def test_trace_coupling_feeds_boundary():
    grid = Grid(6.0, 20, 2.0)
    u0 = grid.sample(lambda x: np.exp(-x))
    zero = grid.sample(lambda x: 0 * x)
    spec = chain_spec(grid, from_trace=True)
    sol = solve_global(spec, [u0, zero], 2.0)
    k = spec.trace_nodes[0]
    u = sol.components
    n = sol.times.size - 1
    # u1(t, x) = u0(t - x, x_k) below the characteristic through the origin
    for j in range(1, n):
        assert u[1].right[n, j] == pytest.approx(u[0].right[n - j, k], abs=1e-13)


def test_single_window_is_a_fixed_point():
    grid = Grid(4.0, 20, 0.5)
    case = decay_case(1.0)
    spec, u0 = case.system(grid)
    w, report = solve_window(spec, u0, grid.times)
    assert report.converged and report.iterations <= 1
    again = apply_T(spec, w, u0)
    assert np.array_equal(again[0].right, w[0].right)


def test_window_reports_respect_ratio_cap():
    case = blowup_case()
    grid = Grid(10.0, 50, 0.5)
    spec, u0 = case.system(grid)
    sol = solve_global(spec, u0, 0.5)
    assert sol.completed
    assert all(r.converged for r in sol.reports)
    assert all(r.max_ratio <= 0.5 for r in sol.reports if r.window[1] - r.window[0] > grid.dt * 1.5)


def test_blowup_diagnostic_without_neg():
    case = blowup_case()
    grid = Grid(10.0, 100, 0.75)
    spec, u0 = case.system(grid)
    sol = solve_global(spec, u0, 0.75)
    assert not sol.completed
    assert 0.6 < sol.blowup.time < 0.75
    assert not all(r.holds for r in sol.neg_checks)


def test_blowup_under_declared_neg_raises():
    grid = Grid(4.0, 10, 1.0)
    spec, u0 = decay_case(1.0).system(grid)
    assert check_neg_condition(spec, u0, 0.0).holds
    flooded = SystemSpec(**{**spec.__dict__, "beta": lambda i, times, traces: np.full(times.size, 100.0)})
    with pytest.raises(BlowupError):
        solve_global(flooded, u0, 1.0, blowup_factor=1.0)


def test_total_mass_of_decay():
    grid = Grid(6.0, 20, 1.0)
    spec, u0 = decay_case(0.5).system(grid)
    sol = solve_global(spec, u0, 1.0)
    assert total_mass(sol) == pytest.approx(np.exp(-0.5 * sol.times) * u0[0].l1(), rel=1e-12)


@settings(max_examples=5, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_solution_stability_bound_holds(eps, mu):
    grid = Grid(6.0, 10, 1.0)
    spec, u0 = decay_case(mu).system(grid)
    u1 = [u0[0] + grid.sample(lambda x: eps * np.exp(-x))]
    s1 = solve_global(spec, u0, 1.0)
    s2 = solve_global(spec, u1, 1.0)
    report = check_solution_stability(spec, spec, u0, u1, s1, s2)
    assert report.holds, str(report)


def test_stability_of_identical_runs_is_zero():
    grid = Grid(6.0, 10, 1.0)
    spec, u0 = transport_case().system(grid)
    sol = solve_global(spec, u0, 1.0)
    report = check_solution_stability(spec, spec, u0, u0, sol, sol)
    assert report.holds and np.all(report.lhs == 0)


def test_empty_horizon_returns_datum():
    grid = Grid(4.0, 10, 1.0)
    spec, u0 = transport_case().system(grid)
    sol = solve_global(spec, u0, 0.0)
    assert sol.times.tolist() == [0.0]
    assert np.array_equal(sol.components[0].right[0], u0[0].right)
    assert math.isclose(sol.components[0].l1()[0], 1.0)
