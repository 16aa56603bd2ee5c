"""Closed-form reference problems for validating the solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Grid, GridFunction
from .coupled_ibvp import SystemConstants, SystemSpec, solve_global
from .scalar_renewal import Coefficients


@dataclass(frozen=True)
class AnalyticCase:
    """A problem with a known solution on ``t < t_max`` and the region ``region``.

    ``build(grid)`` returns the one-component system, ``initial(grid)`` the
    datum on the mesh, and ``coefficients`` the equivalent scalar problem
    when one exists (``None`` for nonlocal cases).
    """

    name: str
    closed_form: Callable[[float, np.ndarray], np.ndarray]
    t_max: float
    region: str
    initial: Callable[[Grid], GridFunction]
    build: Callable[[Grid], SystemSpec]
    coefficients: Coefficients | None = None
    l1_norm: Callable[[float], float] | None = None

    def system(self, grid: Grid) -> tuple[SystemSpec, list[GridFunction]]:
        return self.build(grid), [self.initial(grid)]

    def in_region(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.region == "all":
            return np.ones_like(x, dtype=bool)
        return x > t  # datum-fed region


def _single(grid: Grid, alpha, beta, constants: SystemConstants, neg: bool) -> SystemSpec:
    return SystemSpec(
        n=1,
        nodes=(grid.n_cells + 1,),
        dx=grid.dx,
        alpha=alpha,
        gamma=lambda times: {},
        beta=lambda i, times, traces: beta(times),
        beta_deps=((),),
        trace_nodes=(None,),
        constants=constants,
        pos=True,
        neg=neg,
        names=("u",),
    )


def _exp_datum(grid: Grid) -> GridFunction:
    return grid.sample(lambda x: np.exp(-x))


def _mass_operator(dx: float):
    # alpha[w] = int w, the same at every age
    def alpha(right, left):
        total = 0.5 * dx * (right[0][:, :-1] + left[0][:, 1:]).sum(axis=1)
        return {(0, 0): np.repeat(total[:, None], right[0].shape[1], axis=1)}

    return alpha


def blowup_inflow(t):
    """Boundary flux that makes exp(t - x) / (2 - exp(t)) an exact solution."""
    et = np.exp(np.asarray(t, dtype=float))
    return et / (2 - et)


def blowup_case(t_valid: float = 0.68) -> AnalyticCase:
    """u_t + u_x = (int u) u, u(0) = exp(-x), solution exp(t - x) / (2 - exp(t)).

    The closed form holds on all of x >= 0 only with the inflow
    u(t, 0) = exp(t) / (2 - exp(t)); the solution blows up at t = ln 2.
    Declared boundary constants cover [0, t_valid].
    """
    b_inf = float(blowup_inflow(t_valid))
    b_1 = -math.log(2 - math.exp(t_valid))

    def build(grid: Grid) -> SystemSpec:
        consts = SystemConstants(A_L=1.0, A_1=grid.age_max, B_1=b_1, B_inf=b_inf)
        return _single(grid, _mass_operator(grid.dx), blowup_inflow, consts, neg=False)

    return AnalyticCase(
        name="blowup",
        closed_form=lambda t, x: np.exp(t - np.asarray(x, dtype=float)) / (2 - math.exp(t)),
        t_max=math.log(2),
        region="all",
        initial=_exp_datum,
        build=build,
        l1_norm=lambda t: math.exp(t) / (2 - math.exp(t)),
    )


def blowup_case_zero_inflow() -> AnalyticCase:
    """Same equation with u(t, 0) = 0: u = exp(t - x) / (1 - t) for x > t, zero below.

    The L1 norm is 1 / (1 - t), which blows up at t = 1.
    """

    def build(grid: Grid) -> SystemSpec:
        consts = SystemConstants(A_L=1.0, A_1=grid.age_max)
        return _single(grid, _mass_operator(grid.dx), lambda t: np.zeros_like(np.asarray(t, float)), consts, neg=False)

    def closed(t, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > t, np.exp(t - x) / (1 - t), 0.0)

    return AnalyticCase(
        name="blowup-zero-inflow",
        closed_form=closed,
        t_max=1.0,
        region="all",
        initial=_exp_datum,
        build=build,
        l1_norm=lambda t: 1 / (1 - t),
    )


def _indicator_datum(lo: float, hi: float):
    def initial(grid: Grid) -> GridFunction:
        x = grid.ages
        right = ((x >= lo) & (x < hi)).astype(float)
        left = ((x > lo) & (x <= hi)).astype(float)
        return GridFunction(right, grid.dx, left)

    return initial


def _linear_case(name: str, mu: float, u_o: Callable[[np.ndarray], np.ndarray] | None, initial) -> AnalyticCase:
    coeffs = Coefficients(m=lambda t, x: mu + 0 * x, M=mu, F1=0.0, F_inf=0.0)

    def build(grid: Grid) -> SystemSpec:
        def gamma(times):
            return {(0, 0): np.full((times.size, grid.n_cells + 1), -mu)} if mu else {}

        return SystemSpec(
            n=1,
            nodes=(grid.n_cells + 1,),
            dx=grid.dx,
            alpha=lambda right, left: {},
            gamma=gamma,
            beta=lambda i, times, traces: np.zeros(times.size),
            beta_deps=((),),
            trace_nodes=(None,),
            constants=SystemConstants(C_inf=mu),
            pos=True,
            neg=True,
            names=("u",),
        )

    def closed(t, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > t, u_o(x - t) * math.exp(-mu * t), 0.0)

    return AnalyticCase(name, closed, math.inf, "datum", initial, build, coeffs)


def transport_case(kind: str = "indicator") -> AnalyticCase:
    """Pure transport with zero boundary flux; ``kind`` picks the datum.

    ``indicator`` is 1 on [1, 2], ``ramp`` is x on [0, 2], ``zero`` is 0.
    """
    if kind == "indicator":
        u_o = lambda x: ((x >= 1) & (x < 2)).astype(float)  # noqa: E731
        initial = _indicator_datum(1.0, 2.0)
    elif kind == "ramp":
        u_o = lambda x: np.where((x >= 0) & (x < 2), x, 0.0)  # noqa: E731

        def initial(grid):
            x = grid.ages
            right = np.where(x < 2, x, 0.0)
            left = np.where(x <= 2, x, 0.0)
            return GridFunction(right, grid.dx, left)

    elif kind == "zero":
        u_o = lambda x: np.zeros_like(x)  # noqa: E731

        def initial(grid):
            return grid.sample(lambda x: 0 * x)

    else:
        raise ValueError(f"unknown transport datum {kind!r}")
    return _linear_case(f"transport-{kind}", 0.0, u_o, initial)


def decay_case(mu: float, lo: float = 1.0, hi: float = 2.0) -> AnalyticCase:
    """Transport with constant death rate mu of the indicator of [lo, hi]."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    u_o = lambda x: ((x >= lo) & (x < hi)).astype(float)  # noqa: E731
    return _linear_case(f"decay-{mu:g}", mu, u_o, _indicator_datum(lo, hi))


def shifted_exact(case: AnalyticCase, grid: Grid, t: float) -> GridFunction:
    """Node-aligned exact solution of a transport or decay case at time t.

    Both traces of the datum are shifted by t / dx nodes, which is exact on
    the mesh even across jumps.
    """
    s = grid.time_index(t)
    u0 = case.initial(grid)
    factor = math.exp(-case.coefficients.M * t) if case.coefficients else 1.0
    right = np.zeros(grid.n_cells + 1)
    left = np.zeros(grid.n_cells + 1)
    right[s:] = u0.right[: grid.n_cells + 1 - s] * factor
    left[s:] = u0.left[: grid.n_cells + 1 - s] * factor
    if s > 0:
        left[s] = 0.0
    return GridFunction(right, grid.dx, left)


@dataclass(frozen=True)
class OracleResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.error < self.tolerance


def blowup_errors(cells: int = 400, age_max: float = 20.0) -> tuple[float, float]:
    """Relative sup error at t = 0.5 and absolute L1-norm error at t = 0.6."""
    case = blowup_case()
    grid = Grid(age_max, cells, 0.6)
    spec, u0 = case.system(grid)
    sol = solve_global(spec, u0, 0.6)
    u = sol.components[0]
    n = grid.time_index(0.5)
    exact = case.closed_form(0.5, grid.ages)
    rel = float(max(np.abs(u.right[n] - exact).max(), np.abs(u.left[n] - exact).max()) / np.abs(exact).max())
    return rel, abs(float(u.l1()[-1]) - case.l1_norm(0.6))


def blowup_detection_time(cells: int = 400, age_max: float = 20.0, t_end: float = 0.75) -> float:
    """Time of the blow-up diagnostic, or inf when the run completes."""
    case = blowup_case()
    grid = Grid(age_max, cells, t_end)
    spec, u0 = case.system(grid)
    sol = solve_global(spec, u0, t_end)
    return math.inf if sol.blowup is None else sol.blowup.time


def linear_case_error(case: AnalyticCase, cells: int, t_end: float = 1.0, age_max: float = 6.0) -> float:
    """Sup error against the node-shifted exact solution, relative for nonzero data."""
    grid = Grid(age_max, cells, t_end)
    spec, u0 = case.system(grid)
    sol = solve_global(spec, u0, t_end)
    err, scale = 0.0, 0.0
    for n, t in enumerate(sol.times):
        exact = shifted_exact(case, grid, float(t))
        h = sol.components[0]
        err = max(err, np.abs(h.right[n] - exact.right).max(), np.abs(h.left[n] - exact.left).max())
        scale = max(scale, exact.linf())
    return float(err / scale) if scale > 0 else float(err)


def oracle_suite() -> list[OracleResult]:
    """Closed-form checks of the solver; every entry should pass."""
    rel, l1 = blowup_errors()
    t_blow = blowup_detection_time()
    out = [
        OracleResult("blowup sup error at t=0.5 (relative)", rel, 1e-3),
        OracleResult("blowup L1 norm at t=0.6", l1, 5e-3),
        # distance of the detection time from [0.66, 0.70]
        OracleResult(f"blowup detected at t={t_blow:.4f}", max(0.66 - t_blow, t_blow - 0.70, 0.0), 1e-12),
    ]
    for kind in ("indicator", "ramp", "zero"):
        out.append(OracleResult(f"transport {kind}", linear_case_error(transport_case(kind), 200), 1e-12))
    out.append(OracleResult("decay mu=1 (relative)", linear_case_error(decay_case(1.0), 200), 1e-6))
    return out
