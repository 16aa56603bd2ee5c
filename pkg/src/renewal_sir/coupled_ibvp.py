"""Coupled nonlocal renewal systems solved by a freeze-and-solve fixed point.

Component i obeys

    d_t u_i + d_x (g_i u_i) = (alpha_i[u](x) + gamma_i(t, x)) . u
    g_i(t, 0+) u_i(t, 0+) = beta_i(t, u_1(t, xbar_1-), ..., u_{i-1}(t, xbar_{i-1}-))

The map T freezes w, builds the linear coefficients m_i, f_i, b_i from it,
and solves each scalar problem in index order, so that every boundary flux
reads traces of components already updated in the same sweep.  Picard
iteration of T on short time windows converges; ``solve_global`` chains
windows and adapts their length from the measured contraction ratios.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import GridFunction, History, InequalityReport
from .scalar_renewal import direct_formula, march_unit_speed

log = logging.getLogger(__name__)

Pair = tuple[int, int]
AlphaFn = Callable[[Sequence[np.ndarray], Sequence[np.ndarray]], Mapping[Pair, np.ndarray]]
GammaFn = Callable[[np.ndarray], Mapping[Pair, np.ndarray]]
BetaFn = Callable[[int, np.ndarray, Mapping[int, np.ndarray]], np.ndarray]

FP_TOL = 1e-10
MAX_ITER = 100
MAX_RATIO = 0.5
MAX_WINDOW = 0.5
GROW_RATIO = 0.125
BLOWUP_FACTOR = 1e8


class ComponentSolveError(RuntimeError):
    def __init__(self, component: int, cause: Exception):
        self.component = component
        super().__init__(f"component {component}: {cause}")


class BlowupError(RuntimeError):
    """Blow-up detected although the system declares the dissipation condition."""


class WindowCollapseError(RuntimeError):
    """The fixed point failed to converge even on a single time step."""


@dataclass(frozen=True)
class SystemConstants:
    """Declared bounds on the operators; they only enter a-posteriori estimates."""

    A_L: float = 0.0
    A_1: float = 0.0
    A_2: float = 0.0
    C_L: float = 0.0
    C_inf: float = 0.0
    B_1: float = 0.0
    B_inf: float = 0.0
    B_L: float = 0.0
    G1: float = 0.0
    G_inf: float = 1.0
    g_min: float = 1.0
    g_max: float = 1.0


@dataclass(frozen=True)
class SystemSpec:
    """A coupled system on per-component age meshes of common width ``dx``.

    ``alpha(right, left)`` receives the trace arrays of w (shape
    (K + 1, nodes_j) each) and returns the nonzero entries
    ``(i, j) -> (alpha_i[w])_j`` sampled on component i's mesh.
    ``gamma(times)`` does the same for gamma.  ``beta(i, times, traces)``
    returns b_i on ``times`` given traces at ``trace_nodes`` of the
    components listed in ``beta_deps[i]``; it is called once with left
    traces and once with right traces, which differ only where a jump sits
    on the trace node.  ``speeds`` is None for unit speed, else one
    ``(g, dg_dx)`` pair shared by all components.
    """

    n: int
    nodes: tuple[int, ...]
    dx: float
    alpha: AlphaFn
    gamma: GammaFn
    beta: BetaFn
    beta_deps: tuple[tuple[int, ...], ...]
    trace_nodes: tuple[int | None, ...]
    constants: SystemConstants = SystemConstants()
    pos: bool = False
    neg: bool = False
    speeds: tuple[Callable, Callable] | None = None
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.nodes) != self.n or len(self.beta_deps) != self.n or len(self.trace_nodes) != self.n:
            raise ValueError("per-component tuples must have length n")
        for i, deps in enumerate(self.beta_deps):
            bad = [j for j in deps if j >= i]
            if bad:
                raise ValueError(f"beta_{i} reads traces {bad}; only j < i is allowed")
            for j in deps:
                k = self.trace_nodes[j]
                if k is None or not 0 <= k < self.nodes[j]:
                    raise ValueError(f"component {j} needs a trace node inside its mesh")

    @property
    def eq(self) -> bool:
        return True  # one speed for all components by construction

    def name(self, i: int) -> str:
        return self.names[i] if self.names else f"u{i}"


def _fields(spec: SystemSpec, w_right, w_left, times: np.ndarray):
    alpha = dict(spec.alpha(w_right, w_left))
    gamma = dict(spec.gamma(times))
    return alpha, gamma


def _coefficient(alpha, gamma, i, j):
    a, g = alpha.get((i, j)), gamma.get((i, j))
    if a is None:
        return g
    return a if g is None else a + g


def _interpolant(times: np.ndarray, ages: np.ndarray, values: np.ndarray):
    """Bilinear interpolation of mesh samples, constant beyond the mesh."""
    t0, dt = times[0], times[1] - times[0] if times.size > 1 else 1.0
    dx = ages[1] - ages[0]

    def fn(t, x):
        x = np.asarray(x, dtype=float)
        s = np.clip((t - t0) / dt, 0, times.size - 1)
        n = min(int(s), times.size - 2) if times.size > 1 else 0
        th = s - n if times.size > 1 else 0.0
        row = values[n] if times.size == 1 else (1 - th) * values[n] + th * values[n + 1]
        r = np.clip(x / dx, 0, ages.size - 1)
        k = np.minimum(r.astype(int), ages.size - 2)
        c = r - k
        return (1 - c) * row[k] + c * row[k + 1]

    return fn


def _solve_component(spec, i, start: GridFunction, times, m, f_r, f_l, b, b_left):
    if spec.speeds is None:
        return march_unit_speed(start.right, start.left, m, m, f_r, f_l, b, spec.dx, b_left)
    g, dg = spec.speeds
    ages = np.arange(spec.nodes[i]) * spec.dx
    m_fn = _interpolant(times, ages, m)
    f_fn = _interpolant(times, ages, f_r)
    decay = lambda t, x: m_fn(t, x) + dg(t, x)  # noqa: E731

    def flux(t):
        return np.interp(t, times, b_left)

    right = direct_formula(g, decay, f_fn, flux, start, times, ages)
    right[0] = start.right
    left = right.copy()
    left[0] = start.left
    return right, left


def apply_T(spec: SystemSpec, w: Sequence[History], start: Sequence[GridFunction]) -> list[History]:
    """One application of the freeze-and-solve map on the window of ``w``."""
    times = w[0].times
    alpha, gamma = _fields(spec, [h.right for h in w], [h.left for h in w], times)
    out: list[History] = []
    traces_r: dict[int, np.ndarray] = {}
    traces_l: dict[int, np.ndarray] = {}
    shape_of = lambda i: (times.size, spec.nodes[i])  # noqa: E731
    for i in range(spec.n):
        try:
            diag = _coefficient(alpha, gamma, i, i)
            m = np.zeros(shape_of(i)) if diag is None else -diag
            f_r = np.zeros(shape_of(i))
            f_l = np.zeros(shape_of(i))
            for (a, j) in sorted(set(alpha) | set(gamma)):
                if a != i or j == i:
                    continue
                coef = _coefficient(alpha, gamma, i, j)
                f_r += coef * w[j].right
                f_l += coef * w[j].left
            deps = spec.beta_deps[i]
            b_r = np.asarray(spec.beta(i, times, {j: traces_r[j] for j in deps}), dtype=float) * np.ones(times.size)
            b_l = np.asarray(spec.beta(i, times, {j: traces_l[j] for j in deps}), dtype=float) * np.ones(times.size)
            right, left = _solve_component(spec, i, start[i], times, m, f_r, f_l, b_r, b_l)
        except (ValueError, FloatingPointError, ArithmeticError) as exc:
            raise ComponentSolveError(i, exc) from exc
        h = History(times, spec.dx, right, left)
        if spec.trace_nodes[i] is not None:
            traces_r[i] = right[:, spec.trace_nodes[i]]
            traces_l[i] = left[:, spec.trace_nodes[i]]
        out.append(h)
    return out


def distance(u: Sequence[History], w: Sequence[History]) -> float:
    """max over components of the sup-in-time L1 distance."""
    return max(float(a.l1_distance(b).max()) for a, b in zip(u, w))


# ---------------------------------------------------------------- constants


def ball_constants(spec: SystemSpec, start: Sequence[GridFunction]) -> dict[str, float]:
    """K1, K_inf at twice their lower bounds, and the frozen-problem constants."""
    c = spec.constants
    n = spec.n
    l1 = sum(u.l1() for u in start)
    linf = max(u.linf() for u in start)
    tv = max(u.tv() for u in start)
    lift = 1 + n * c.B_L / c.g_min
    k1 = 2 * (l1 + c.B_1)
    k_inf = 2 * max(lift * linf + c.B_inf / c.g_min, (5 + c.G_inf / c.g_min) * (2 * c.B_inf / c.g_min + lift * (linf + tv)))
    return frozen_constants(spec, k1, k_inf)


def frozen_constants(spec: SystemSpec, k1: float, k_inf: float) -> dict[str, float]:
    c = spec.constants
    n = spec.n
    return {
        "K1": k1,
        "K_inf": k_inf,
        "M": c.A_L * k1 + c.C_inf,
        "F_inf": 2 * n * k_inf * (c.C_inf + c.A_L * k1),
        "F1": n * (c.A_L * k1**2 + c.C_inf * k1),
    }


# ---------------------------------------------------------------- window solve


@dataclass
class FixedPointReport:
    window: tuple[float, float]
    iterations: int
    distances: list[float]
    contraction_ratios: list[float]
    converged: bool
    diverged: bool = False
    tolerance: float = 0.0
    constants: dict = field(default_factory=dict)
    ball: dict = field(default_factory=dict)

    @property
    def max_ratio(self) -> float:
        return max(self.contraction_ratios, default=0.0)


def _finite_and_bounded(hs: Sequence[History], threshold: float) -> bool:
    for h in hs:
        if not (np.all(np.isfinite(h.right)) and np.all(np.isfinite(h.left))):
            return False
        if h.linf().max() > threshold:
            return False
    return True


def solve_window(
    spec: SystemSpec,
    start: Sequence[GridFunction],
    times: np.ndarray,
    fp_tol: float = FP_TOL,
    max_iter: int = MAX_ITER,
    threshold: float = math.inf,
    abort_ratio: float | None = None,
) -> tuple[list[History], FixedPointReport]:
    """Picard iteration of T on ``times`` from the constant-in-time extension of ``start``.

    Stops when the step distance falls to ``fp_tol * K1``.  With
    ``abort_ratio`` set, the iteration gives up as soon as a measured ratio
    exceeds it (the caller will shrink the window anyway).
    """
    consts = ball_constants(spec, start)
    tol = fp_tol * (consts["K1"] if consts["K1"] > 0 else 1.0)
    k = times.size
    w = [History(times, spec.dx, np.tile(u.right, (k, 1)), np.tile(u.left, (k, 1))) for u in start]
    distances: list[float] = []
    ratios: list[float] = []
    converged = diverged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter + 1):
            u = apply_T(spec, w, start)
            if not _finite_and_bounded(u, threshold):
                diverged = True
                break
            d = distance(u, w)
            if distances and distances[-1] > 0:
                ratios.append(d / distances[-1])
            distances.append(d)
            w = u
            if d <= tol:
                converged = True
                break
            if abort_ratio is not None and ratios and ratios[-1] > abort_ratio:
                break
    iterations = len(distances) - 1 if converged else len(distances)
    ball = {
        "max_l1": max(float(h.l1().max()) for h in w),
        "max_linf": max(float(h.linf().max()) for h in w),
        "max_tv": max(float(h.tv().max()) for h in w),
    }
    report = FixedPointReport(
        (float(times[0]), float(times[-1])), iterations, distances, ratios, converged, diverged, tol, consts, ball
    )
    return w, report


# ---------------------------------------------------------------- global solve


@dataclass
class BlowupDiagnostic:
    time: float
    linf: float
    threshold: float
    reason: str


@dataclass
class GlobalSolution:
    components: list[History]
    reports: list[FixedPointReport]
    blowup: BlowupDiagnostic | None
    neg_checks: list[InequalityReport] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.components[0].times

    @property
    def completed(self) -> bool:
        return self.blowup is None

    @property
    def total_iterations(self) -> int:
        return sum(r.iterations for r in self.reports)

    def state(self, n: int) -> list[GridFunction]:
        return [h.at(n) for h in self.components]


def solve_global(
    spec: SystemSpec,
    start: Sequence[GridFunction],
    t_end: float,
    t_start: float = 0.0,
    fp_tol: float = FP_TOL,
    max_iter: int = MAX_ITER,
    max_window: float = MAX_WINDOW,
    blowup_factor: float = BLOWUP_FACTOR,
) -> GlobalSolution:
    """Chain fixed-point windows from ``t_start`` to ``t_end``.

    The window halves when the iteration fails or a ratio exceeds 0.5, and
    doubles (up to ``max_window``) after two consecutive windows that needed
    at most two iterations or whose ratios all stayed below 0.125.
    Divergence on a single-step window, or an accepted state beyond the blow-up threshold, ends the run with a diagnostic; this
    raises ``BlowupError`` instead when the system declares NEG.
    """
    dt = spec.dx
    n_total = int(round((t_end - t_start) / dt))
    max_steps = max(1, int(round(max_window / dt)))
    steps = max_steps
    threshold = blowup_factor * (max(u.linf() for u in start) + 1.0)
    state = list(start)
    parts: list[list[History]] = []
    reports: list[FixedPointReport] = []
    neg_checks: list[InequalityReport] = []
    blowup = None
    done = 0
    quick = 0
    while done < n_total:
        steps = min(steps, n_total - done)
        times = t_start + dt * np.arange(done, done + steps + 1)
        sol, rep = solve_window(
            spec, state, times, fp_tol, max_iter, threshold, abort_ratio=MAX_RATIO if steps > 1 else None
        )
        accept = rep.converged and (rep.max_ratio <= MAX_RATIO or steps == 1)
        if not accept:
            if steps > 1:
                steps = max(1, steps // 2)
                quick = 0
                continue
            if rep.diverged:
                blowup = BlowupDiagnostic(float(times[-1]), math.inf, threshold, "fixed point diverged on a single step")
                break
            raise WindowCollapseError(f"no convergence on one step at t = {times[0]:.6g}")
        reports.append(rep)
        parts.append(sol)
        state = [h.at(h.n_times - 1) for h in sol]
        done += steps
        neg_checks.append(check_neg_condition(spec, state, float(times[-1])))
        peak = max(float(h.linf().max()) for h in sol)
        if peak > threshold:
            blowup = BlowupDiagnostic(float(times[-1]), peak, threshold, "state exceeded blow-up threshold")
            break
        quick = quick + 1 if rep.iterations <= 2 or rep.max_ratio <= GROW_RATIO else 0
        if quick >= 2 and steps < max_steps:
            steps = min(max_steps, 2 * steps)
            quick = 0
    if blowup is not None:
        log.warning("blow-up at t = %.6g: %s", blowup.time, blowup.reason)
        if spec.neg and all(r.holds for r in neg_checks):
            raise BlowupError(f"blow-up at t = {blowup.time:.6g} contradicts the declared dissipation condition")
    if parts:
        components = [History.concatenate([p[i] for p in parts]) for i in range(spec.n)]
    else:
        t0 = np.array([t_start])
        components = [History(t0, spec.dx, u.right[None, :].copy(), u.left[None, :].copy()) for u in start]
    return GlobalSolution(components, reports, blowup, neg_checks)


# ---------------------------------------------------------------- checks


def neg_field(spec: SystemSpec, state: Sequence[GridFunction], t: float) -> np.ndarray:
    """sum_i (alpha_i[u] + gamma_i(t)) . u at every node, for both traces.

    Components on shorter meshes count as zero beyond their last node.
    Returns an array of shape (2, longest mesh): right traces, then left.
    """
    times = np.array([t])
    alpha, gamma = _fields(spec, [u.right[None, :] for u in state], [u.left[None, :] for u in state], times)
    total = np.zeros((2, max(spec.nodes)))
    for (i, j) in set(alpha) | set(gamma):
        coef = _coefficient(alpha, gamma, i, j)[0]
        total[0, : spec.nodes[i]] += coef * state[j].right
        total[1, : spec.nodes[i]] += coef * state[j].left
    return total


def check_neg_condition(spec: SystemSpec, state: Sequence[GridFunction], t: float) -> InequalityReport:
    """Largest nodal value of sum_i (alpha_i[u] + gamma_i(t)) . u; holds if <= 1e-10."""
    values = neg_field(spec, state, t)
    return InequalityReport("neg-condition", float(values.max(initial=0.0)), 0.0, 1e-10, {"t": t})


def _beta_gap(first: SystemSpec, second: SystemSpec, times: np.ndarray, k_inf: float) -> float:
    """Sup of |beta' - beta''| over the time mesh and a lattice of trace values in [0, K_inf]."""
    gap = 0.0
    levels = (0.0, 0.5 * k_inf, k_inf)
    for i in range(first.n):
        deps = first.beta_deps[i]
        for combo in product(levels, repeat=len(deps)):
            traces = {j: np.full(times.size, v) for j, v in zip(deps, combo)}
            b1 = np.asarray(first.beta(i, times, traces), dtype=float)
            b2 = np.asarray(second.beta(i, times, traces), dtype=float)
            gap = max(gap, float(np.max(np.abs(b1 - b2))))
    return gap


def check_solution_stability(
    first: SystemSpec,
    second: SystemSpec,
    start_1: Sequence[GridFunction],
    start_2: Sequence[GridFunction],
    sol_1: GlobalSolution,
    sol_2: GlobalSolution,
) -> InequalityReport:
    """L1 distance of two runs against the Gronwall bound built from H1 and H2.

    K1 and K_inf are the larger of the ball radii for either datum and the
    sup norms measured along both runs.
    """
    c = first.constants
    n = first.n
    t = sol_1.times - sol_1.times[0]
    steps = min(sol_1.times.size, sol_2.times.size)
    t = t[:steps]
    b1, b2 = ball_constants(first, start_1), ball_constants(second, start_2)
    measured_l1 = max(float(sum(h.l1()[:steps] for h in sol.components).max()) for sol in (sol_1, sol_2))
    measured_inf = max(
        max(float(h.linf()[:steps].max()), float(h.tv()[:steps].max()))
        for sol in (sol_1, sol_2)
        for h in sol.components
    )
    k1 = max(b1["K1"], b2["K1"], float(measured_l1))
    k_inf = max(b1["K_inf"], b2["K_inf"], measured_inf)
    fc = frozen_constants(first, k1, k_inf)
    M, F_inf = fc["M"], fc["F_inf"]
    G1 = c.G1
    uo1_inf = max(u.linf() for u in start_1)
    uo2_inf = max(u.linf() for u in start_2)
    du_o = sum((a - b).l1() for a, b in zip(start_1, start_2))
    d_beta = _beta_gap(first, second, sol_1.times[:steps], k_inf)
    e = lambda r: np.exp(r * t)  # noqa: E731
    h1 = (
        n * e(2 * (G1 + M)) * (2 * c.A_L * k1 + 2 * n * c.A_1 * k_inf + 2 * c.C_inf)
        + n**2 * e(3 * (G1 + M)) * (c.B_L * c.A_1 / c.G_inf) * (e(G1) * uo1_inf + t * F_inf)
        + n**2 * e(4 * G1 + 3 * M) * c.B_L * (c.A_L * k1 + n * c.A_1 * k_inf + c.C_inf)
        + n**2 * e(2 * (G1 + M)) * c.A_1 * (uo2_inf + 2 * n * t * F_inf + (n / c.g_min) * (c.B_inf + n * c.B_L * k_inf))
    )
    h2 = n * e(M) * (1 + c.B_L * e(2 * (G1 + M)))
    with np.errstate(over="ignore", invalid="ignore"):
        rhs = np.exp(h1 * t) * (h2 * du_o + e(2 * (G1 + M)) * d_beta * t)
    rhs = np.where(np.isnan(rhs), np.inf, rhs)
    lhs = sum(a.slice(0, steps).l1_distance(b.slice(0, steps)) for a, b in zip(sol_1.components, sol_2.components))
    details = {"K1": k1, "K_inf": k_inf, "d_u_o": du_o, "d_beta": d_beta, "H1": h1, "H2": h2}
    return InequalityReport("solution-stability", lhs, rhs, 1e-12, details)


def total_mass(sol: GlobalSolution) -> np.ndarray:
    return sum(h.integral() for h in sol.components)
