"""Scalar linear renewal problem solved along characteristics.

    u_t + (g u)_x + m u = f   on t > 0, x > 0
    u(0, x) = u_o(x),   g(t, 0) u(t, 0+) = b(t)

Two routes produce the same characteristic formula.  With unit speed the
characteristics run through mesh nodes and the formula is evaluated by a
node-to-node march (trapezoid rule along each diagonal), which also keeps
separate left and right traces so that jumps travel without smearing.  For
a general speed each node is traced backward with a fixed-step RK4 scheme
and the weight and source integrals are accumulated along the trace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import (
    Grid,
    GridFunction,
    History,
    InequalityReport,
    cumulative_trapezoid,
    trapezoid,
)

Field = Callable[[float, np.ndarray], np.ndarray]

SOLVER_TOL = 1e-8
POS_TOL = 1e-12
ENTRY_TOL = 1e-12
_SIGMA_TOL = 1e-12


class HypothesisViolation(ValueError):
    """A sampled coefficient breaks one of its declared bounds."""

    def __init__(self, constant: str, measured: float, declared: float, where: str = ""):
        self.constant = constant
        self.measured = measured
        self.declared = declared
        msg = f"declared constant {constant} = {declared:.6g} violated: sampled {measured:.6g}"
        super().__init__(msg + (f" ({where})" if where else ""))


class InputError(ValueError):
    pass


def _zero_field(t, x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _zero_flux(t):
    return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class Coefficients:
    """Speed, rate, source and boundary flux with their declared bounds.

    ``g = None`` means unit speed.  Callables are vectorized over ``x``
    (fields) or ``t`` (boundary flux).  The constants default to infinity,
    which disables the corresponding check; ``with_sampled_constants``
    fills them from samples.
    """

    m: Field = _zero_field
    f: Field = _zero_field
    b: Callable[[np.ndarray], np.ndarray] = _zero_flux
    g: Field | None = None
    dg_dx: Field | None = None
    g_min: float = 1.0
    g_max: float = 1.0
    F1: float = math.inf
    F_inf: float = math.inf
    G1: float = 0.0
    G_inf: float = 1.0
    M: float = math.inf

    def __post_init__(self):
        if self.g is not None and self.dg_dx is None:
            raise ValueError("a non-unit speed needs its x-derivative dg_dx")
        if not 0 < self.g_min <= self.g_max:
            raise ValueError("speed bounds must satisfy 0 < g_min <= g_max")

    @property
    def unit_speed(self) -> bool:
        return self.g is None

    def speed(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.g is None:
            return np.ones_like(x)
        return np.asarray(self.g(t, x), dtype=float) * np.ones_like(x)

    def speed_slope(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dg_dx is None:
            return np.zeros_like(x)
        return np.asarray(self.dg_dx(t, x), dtype=float) * np.ones_like(x)

    def rate(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.m(t, x), dtype=float) * np.ones_like(x)

    def source(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.f(t, x), dtype=float) * np.ones_like(x)

    def flux(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.asarray(self.b(t), dtype=float) * np.ones_like(t)

    def sampled_constants(self, grid: Grid, t_end: float | None = None) -> dict[str, float]:
        """Sup/TV quantities of the coefficients measured on the mesh."""
        times = _times_to(grid, t_end)
        ages = grid.ages
        m = np.array([self.rate(t, ages) for t in times])
        f = np.array([self.source(t, ages) for t in times])
        g = np.array([self.speed(t, ages) for t in times])
        dg = np.array([self.speed_slope(t, ages) for t in times])
        return _measure(m, f, g, dg, grid.dx)

    def with_sampled_constants(self, grid: Grid, t_end: float | None = None, slack: float = 1.0):
        """Copy with every constant set to ``slack`` times its sampled value."""
        c = self.sampled_constants(grid, t_end)
        g_inf = c["G_inf"] * slack if c["G_inf"] > 0 else self.G_inf
        return replace(
            self,
            M=c["M"] * slack,
            F1=c["F1"] * slack,
            F_inf=c["F_inf"] * slack,
            G1=c["G1"] * slack,
            G_inf=g_inf,
            g_min=min(self.g_min, c["g_min"]),
            g_max=max(self.g_max, c["g_max"]),
        )


def _times_to(grid: Grid, t_end: float | None) -> np.ndarray:
    times = grid.times
    if t_end is None:
        return times
    return times[: grid.time_index(t_end) + 1]


def _row_tv(a: np.ndarray) -> np.ndarray:
    return np.abs(np.diff(a, axis=-1)).sum(axis=-1)


def _measure(m, f, g, dg, dx) -> dict[str, float]:
    return {
        "M": float(np.max(np.abs(m).max(axis=1) + _row_tv(m))),
        "F1": float(np.max(trapezoid(np.abs(f), dx, axis=1))),
        "F_inf": float(np.max(np.abs(f).max(axis=1) + _row_tv(f))),
        "G1": float(np.max(np.abs(dg).max(axis=1) + _row_tv(dg))),
        "G_inf": float(_row_tv(g).max() + _row_tv(g.T).max()),
        "g_min": float(g.min()),
        "g_max": float(g.max()),
    }


def _exceeds(measured: float, declared: float) -> bool:
    return measured > declared * (1 + 1e-9) + 1e-12


def check_coefficients(
    coeffs: Coefficients, m: np.ndarray, f: np.ndarray, g: np.ndarray, dg: np.ndarray, dx: float
) -> None:
    """Raise ``HypothesisViolation`` if sampled coefficients break a declared constant."""
    c = _measure(m, f, g, dg, dx)
    if c["g_min"] < coeffs.g_min * (1 - 1e-12):
        raise HypothesisViolation("g_min", c["g_min"], coeffs.g_min, "speed below lower bound")
    if _exceeds(c["g_max"], coeffs.g_max):
        raise HypothesisViolation("g_max", c["g_max"], coeffs.g_max, "speed above upper bound")
    for name, declared in (("M", coeffs.M), ("F1", coeffs.F1), ("F_inf", coeffs.F_inf), ("G1", coeffs.G1)):
        if _exceeds(c[name], declared):
            raise HypothesisViolation(name, c[name], declared)
    if not coeffs.unit_speed and _exceeds(c["G_inf"], coeffs.G_inf):
        raise HypothesisViolation("G_inf", c["G_inf"], coeffs.G_inf)


# ---------------------------------------------------------------- characteristics


def _rk4(g: Field, t, x, h):
    k1 = g(t, x)
    k2 = g(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = g(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = g(t + h, x + h * k3)
    return x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def _uniform_steps(span: float, dt: float) -> tuple[int, float]:
    n = max(1, int(math.ceil(abs(span) / dt - 1e-9)))
    return n, span / n


@dataclass(frozen=True)
class CharacteristicTrace:
    """Samples of X(t; t_o, x_o) on a uniform time mesh."""

    base_point: tuple[float, float]
    times: np.ndarray
    positions: np.ndarray
    truncated: bool = False

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.positions.tolist()))

    @property
    def end(self) -> float:
        return float(self.positions[-1])


def trace_forward(
    coeffs: Coefficients,
    t_o: float,
    x_o: float,
    t_end: float,
    dt: float = 1e-3,
    age_max: float | None = None,
) -> CharacteristicTrace:
    """Integrate dX/dt = g(t, X) from (t_o, x_o) to t_end with RK4.

    The trace stops early, flagged ``truncated``, once it leaves [0, age_max].
    """
    if t_end < t_o:
        raise ValueError("t_end must not precede t_o")
    n, h = _uniform_steps(t_end - t_o, dt)
    if t_end == t_o:
        n, h = 0, 0.0
    times = [t_o]
    xs = [float(x_o)]
    truncated = False
    for k in range(n):
        if coeffs.unit_speed:
            x = xs[-1] + h
        else:
            x = float(_rk4(coeffs.speed, times[-1], xs[-1], h))
        t = t_o + (k + 1) * h
        times.append(t)
        xs.append(x)
        if age_max is not None and x > age_max:
            truncated = True
            break
    return CharacteristicTrace((t_o, float(x_o)), np.array(times), np.array(xs), truncated)


def boundary_curve(coeffs: Coefficients, t: float, dt: float = 1e-3) -> float:
    """sigma(t), the position at time t of the characteristic leaving the origin."""
    return trace_forward(coeffs, 0.0, 0.0, t, dt).end


def trace_backward_entry_time(coeffs: Coefficients, t: float, x: float, dt: float = 1e-3) -> float:
    """Time at which the characteristic through (t, x) left the boundary x = 0.

    Only defined for x < sigma(t); points on or beyond sigma(t) belong to
    the region fed by the initial datum and raise ``ValueError``.
    """
    sigma = boundary_curve(coeffs, t, dt)
    if x >= sigma - _SIGMA_TOL:
        raise ValueError(f"x = {x} is not below sigma({t}) = {sigma}: datum-influenced point")
    if x < 0:
        raise ValueError("x must be nonnegative")
    lo, hi = 0.0, float(t)  # X(t; lo, 0) >= x > X(t; hi, 0) = 0
    while hi - lo > ENTRY_TOL:
        mid = 0.5 * (lo + hi)
        if trace_forward(coeffs, mid, 0.0, t, dt).end > x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def exponential_weight(coeffs: Coefficients, tau: float, t: float, x: float, dt: float = 1e-3) -> float:
    """exp(-int_tau^t (m + dg/dx)(s, X(s; t, x)) ds) by trapezoid along the RK4 trace."""
    if tau > t:
        raise ValueError("tau must not exceed t")
    if tau == t:
        return 1.0
    n, h = _uniform_steps(t - tau, dt)
    s = t
    pos = float(x)
    integrand = [_decay(coeffs, s, pos)]
    for _ in range(n):
        pos = pos - h if coeffs.unit_speed else float(_rk4(coeffs.speed, s, pos, -h))
        s -= h
        integrand.append(_decay(coeffs, s, pos))
    return float(math.exp(-trapezoid(np.array(integrand), h)))


def _decay(coeffs: Coefficients, t, x):
    return float(coeffs.rate(t, np.array([x]))[0] + coeffs.speed_slope(t, np.array([x]))[0])


# ---------------------------------------------------------------- solvers


def march_unit_speed(
    u0_right: np.ndarray,
    u0_left: np.ndarray,
    m_right: np.ndarray,
    m_left: np.ndarray,
    f_right: np.ndarray,
    f_left: np.ndarray,
    b: np.ndarray,
    dt: float,
    b_left: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Characteristic formula for unit speed on a node-aligned mesh.

    Coefficient arrays have shape (K + 1, nodes) and hold samples at the
    time nodes; ``b`` has length K + 1.  Each step carries node k at time n
    to node k + 1 at time n + 1, multiplying by the trapezoid weight and
    adding the trapezoid source term.  The left trace at node 0 of the first
    time starts from the boundary value so that the interface between
    boundary- and datum-fed regions stays a sharp jump.

    ``b_left`` optionally gives a different flux for the left trace at
    node 0, for boundaries fed by a trace that itself jumps at a node time.
    """
    steps = len(b) - 1
    b_left = b if b_left is None else b_left
    right = np.empty((steps + 1, u0_right.size))
    left = np.empty_like(right)
    right[0] = u0_right
    left[0] = u0_left
    carry_left = np.array(u0_left, dtype=float)
    carry_left[0] = b_left[0]
    half = 0.5 * dt
    for n in range(steps):
        er = np.exp(-half * (m_right[n, :-1] + m_right[n + 1, 1:]))
        el = np.exp(-half * (m_left[n, :-1] + m_left[n + 1, 1:]))
        right[n + 1, 1:] = right[n, :-1] * er + half * (f_right[n, :-1] * er + f_right[n + 1, 1:])
        left[n + 1, 1:] = carry_left[:-1] * el + half * (f_left[n, :-1] * el + f_left[n + 1, 1:])
        right[n + 1, 0] = b[n + 1]
        left[n + 1, 0] = b_left[n + 1]
        carry_left = left[n + 1]
    return right, left


def direct_formula(
    speed: Field,
    decay: Field,
    source: Field,
    flux: Callable,
    u_o: GridFunction,
    times: np.ndarray,
    ages: np.ndarray,
) -> np.ndarray:
    """Evaluate the characteristic formula at every (times[n], ages[k]).

    ``decay`` is m + dg/dx.  All output times are traced backward together:
    at sweep step s every active trace sits at time ``times[s]`` and the
    traces starting at that time join the sweep.  A trace that crosses
    x = 0 within a step has its exit time located by bisection on the step
    length and takes the boundary branch b(T) E / g(T, 0); traces still
    inside the domain at t = 0 take the datum branch.
    """
    nx = ages.size
    out = np.empty((len(times), nx))
    flat = out.reshape(-1)
    idx = np.empty(0, dtype=int)
    x = np.empty(0)
    h_cur = f_cur = phi = weight = acc = np.empty(0)
    for s in range(len(times) - 1, 0, -1):
        ts, tp = times[s], times[s - 1]
        idx = np.concatenate([idx, s * nx + np.arange(nx)])
        x = np.concatenate([x, ages])
        h_cur = np.concatenate([h_cur, decay(ts, ages)])
        f_cur = np.concatenate([f_cur, source(ts, ages)])
        phi = np.concatenate([phi, np.zeros(nx)])
        weight = np.concatenate([weight, np.ones(nx)])
        acc = np.concatenate([acc, np.zeros(nx)])
        step = ts - tp
        x_new = _rk4(speed, ts, x, -step)
        out_mask = x_new < -_SIGMA_TOL
        if out_mask.any():
            flat[idx[out_mask]] = _boundary_branch(
                speed, decay, source, flux, ts, step,
                x[out_mask], h_cur[out_mask], f_cur[out_mask],
                phi[out_mask], weight[out_mask], acc[out_mask],
            )
            keep = ~out_mask
            idx, x_new = idx[keep], x_new[keep]
            h_cur, f_cur = h_cur[keep], f_cur[keep]
            phi, weight, acc = phi[keep], weight[keep], acc[keep]
        x = np.maximum(x_new, 0.0)
        h_new = decay(tp, x)
        f_new = source(tp, x)
        phi = phi + 0.5 * step * (h_cur + h_new)
        w_new = np.exp(-phi)
        acc = acc + 0.5 * step * (f_cur * weight + f_new * w_new)
        h_cur, f_cur, weight = h_new, f_new, w_new
    flat[idx] = u_o(x) * weight + acc
    out[0] = u_o(ages)
    return out


def _boundary_branch(speed, decay, source, flux, ts, step, x, h_cur, f_cur, phi, weight, acc):
    lo = np.zeros_like(x)
    hi = np.full_like(x, step)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        inside = _rk4(speed, ts, x, -mid) >= 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    h = 0.5 * (lo + hi)
    entry = ts - h
    origin = np.zeros(1)
    h_end = np.array([decay(e, origin)[0] for e in entry])
    f_end = np.array([source(e, origin)[0] for e in entry])
    g_end = np.array([speed(e, origin)[0] for e in entry])
    w_end = np.exp(-(phi + 0.5 * h * (h_cur + h_end)))
    acc = acc + 0.5 * h * (f_cur * weight + f_end * w_end)
    return np.asarray(flux(entry), dtype=float) * w_end / g_end + acc


@dataclass(frozen=True)
class ScalarSolution:
    """A completed scalar solve together with the samples it consumed."""

    history: History
    coeffs: Coefficients
    u_o: GridFunction
    boundary: np.ndarray
    m_samples: np.ndarray
    f_samples: np.ndarray
    sigma: np.ndarray
    extras: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.history.times

    def at(self, n: int) -> GridFunction:
        return self.history.at(n)


def solve_scalar(
    coeffs: Coefficients,
    u_o: GridFunction,
    grid: Grid,
    t_end: float | None = None,
    check: bool = True,
    method: str = "auto",
) -> ScalarSolution:
    """Solve the scalar renewal problem on ``grid`` up to ``t_end``.

    ``method`` is ``"march"`` (unit speed only), ``"direct"`` or ``"auto"``
    (march for unit speed, direct otherwise).
    """
    if u_o.n_nodes != grid.n_cells + 1:
        raise ValueError("initial datum does not match the grid")
    times = _times_to(grid, t_end)
    ages = grid.ages
    m = np.array([coeffs.rate(t, ages) for t in times])
    f = np.array([coeffs.source(t, ages) for t in times])
    b = coeffs.flux(times)
    if check:
        g = np.array([coeffs.speed(t, ages) for t in times])
        dg = np.array([coeffs.speed_slope(t, ages) for t in times])
        check_coefficients(coeffs, m, f, g, dg, grid.dx)
    if method == "auto":
        method = "march" if coeffs.unit_speed else "direct"
    if method == "march":
        if not coeffs.unit_speed:
            raise ValueError("the march route needs unit speed")
        right, left = march_unit_speed(u_o.right, u_o.left, m, m, f, f, b, grid.dt)
        sigma = times.copy()
    elif method == "direct":
        decay = lambda t, x: coeffs.rate(t, x) + coeffs.speed_slope(t, x)  # noqa: E731
        right = direct_formula(coeffs.speed, decay, coeffs.source, coeffs.flux, u_o, times, ages)
        right[0] = u_o.right
        left = right.copy()
        left[0] = u_o.left
        sigma = trace_forward(coeffs, 0.0, 0.0, times[-1], grid.dt).positions
    else:
        raise ValueError(f"unknown method {method!r}")
    history = History(times, grid.dx, right, left)
    return ScalarSolution(history, coeffs, u_o, b, m, f, sigma)


# ---------------------------------------------------------------- runtime checks


def _running_trapezoid_abs(values: np.ndarray, dt: float) -> np.ndarray:
    return cumulative_trapezoid(np.abs(values), dt)


def check_apriori_bounds(sol: ScalarSolution) -> list[InequalityReport]:
    """L-infinity, L1 and TV bounds at every output time from declared constants."""
    c = sol.coeffs
    t = sol.times
    dt = t[1] - t[0] if t.size > 1 else 0.0
    h = sol.history
    growth = (c.G1 + c.M) * t
    b_sup = np.maximum.accumulate(np.abs(sol.boundary))
    b_l1 = _running_trapezoid_abs(sol.boundary, dt)
    b_tv = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(sol.boundary)))])
    uo = sol.u_o
    linf_lhs = np.maximum.accumulate(h.linf())
    linf_rhs = (uo.linf() + b_sup / c.g_min + c.F_inf * t) * np.exp(growth)
    l1_lhs = np.maximum.accumulate(h.l1())
    l1_rhs = (uo.l1() + b_l1 + c.F1 * t) * np.exp(c.M * t)
    bracket = (
        (2 + c.G_inf / c.g_min + growth) * b_sup / c.g_min
        + b_tv / c.g_min
        + (growth + 5) * c.F_inf * t
        + (2 + growth) * uo.linf()
        + uo.tv()
    )
    tv_rhs = bracket * np.exp(growth)
    scale = lambda r: 1e-10 * max(1.0, float(np.max(np.abs(r))))  # noqa: E731
    return [
        InequalityReport("apriori-linf", linf_lhs, linf_rhs, scale(linf_rhs)),
        InequalityReport("apriori-l1", l1_lhs, l1_rhs, scale(l1_rhs)),
        InequalityReport("apriori-tv", h.tv(), tv_rhs, scale(tv_rhs)),
    ]


def _same_speed(a: Coefficients, b: Coefficients) -> bool:
    return a.g is b.g


def check_monotonicity(lower: ScalarSolution, upper: ScalarSolution, tol: float = 1e-10) -> InequalityReport:
    """Ordered data (f, u_o, b) with a shared speed and rate give ordered solutions.

    Raises ``InputError`` if the data are not ordered or the problems differ
    in speed, rate or mesh.
    """
    if not _same_speed(lower.coeffs, upper.coeffs):
        raise InputError("monotonicity needs a shared speed")
    if lower.history.right.shape != upper.history.right.shape:
        raise InputError("solutions live on different meshes")
    if not np.array_equal(lower.m_samples, upper.m_samples):
        raise InputError("monotonicity needs a shared rate m")
    if np.any(lower.f_samples > upper.f_samples):
        raise InputError("sources are not ordered: f' > f'' somewhere")
    if np.any(lower.u_o.right > upper.u_o.right) or np.any(lower.u_o.left > upper.u_o.left):
        raise InputError("initial data are not ordered")
    if np.any(lower.boundary > upper.boundary):
        raise InputError("boundary data are not ordered")
    lo, up = lower.history, upper.history
    lhs = np.maximum((lo.right - up.right).max(axis=1), (lo.left - up.left).max(axis=1))
    return InequalityReport("monotonicity", lhs, np.zeros_like(lhs), tol)


def check_data_stability(
    first: ScalarSolution, second: ScalarSolution, x_bar_node: int | None = None
) -> list[InequalityReport]:
    """L1 stability with respect to u_o, f, b and m, plus the vertical-line bound.

    Constants are the larger of the two declared sets.  The vertical-line
    report (only when ``x_bar_node`` is given) covers the times with
    sigma(t) < x_bar.
    """
    if not _same_speed(first.coeffs, second.coeffs):
        raise InputError("stability comparison needs a shared speed")
    c1, c2 = first.coeffs, second.coeffs
    M = max(c1.M, c2.M)
    G1 = max(c1.G1, c2.G1)
    F1 = max(c1.F1, c2.F1)
    F_inf = max(c1.F_inf, c2.F_inf)
    t = first.times
    dx = first.history.dx
    dt = t[1] - t[0] if t.size > 1 else 0.0
    du_o = (first.u_o - second.u_o).l1()
    df_rows = trapezoid(np.abs(first.f_samples - second.f_samples), dx, axis=1)
    df = cumulative_trapezoid(df_rows, dt)
    db = _running_trapezoid_abs(first.boundary - second.boundary, dt)
    dm = np.maximum.accumulate(np.abs(first.m_samples - second.m_samples).max(axis=1))
    b2 = _running_trapezoid_abs(second.boundary, dt)
    lhs = first.history.l1_distance(second.history)
    rhs = (
        np.exp(M * t) * du_o
        + np.exp(2 * (G1 + M) * t) * (2 * df + db)
        + np.exp((2 * G1 + M) * t) * (second.u_o.l1() + 2 * t * F1 + b2) * t * dm
    )
    tol = 1e-10 * max(1.0, float(np.max(rhs)))
    reports = [InequalityReport("stability-l1", lhs, rhs, tol)]
    if x_bar_node is not None:
        x_bar = x_bar_node * dx
        valid = first.sigma < x_bar
        gap = np.abs(first.history.right[:, x_bar_node] - second.history.right[:, x_bar_node])
        v_lhs = cumulative_trapezoid(gap, dt)[valid]
        tv = t[valid]
        v_rhs = (
            np.exp((G1 + M) * tv) * tv * (np.exp(G1 * tv) * first.u_o.l1() + tv**2 * F_inf) * dm[valid]
            + np.exp(M * tv) * du_o
            + np.exp((2 * G1 + M) * tv) * df[valid]
        )
        v_tol = 1e-10 * max(1.0, float(np.max(v_rhs, initial=0.0)))
        reports.append(InequalityReport("stability-vertical", v_lhs, v_rhs, v_tol))
    return reports


def boundary_residual(sol: ScalarSolution) -> float:
    """max_t |g(t, 0) u(t, 0+) - b(t)|."""
    g0 = np.array([sol.coeffs.speed(t, np.zeros(1))[0] for t in sol.times])
    return float(np.max(np.abs(g0 * sol.history.right[:, 0] - sol.boundary)))


def check_positivity(sol: ScalarSolution, tol: float = POS_TOL) -> InequalityReport:
    lhs = -np.minimum(sol.history.right.min(axis=1), sol.history.left.min(axis=1))
    return InequalityReport("positivity", lhs, np.zeros_like(lhs), tol)


def weight_bound_report(coeffs: Coefficients, points: np.ndarray, dt: float = 1e-3) -> InequalityReport:
    """Every weight E(tau, t, x) at rows (tau, t, x) stays below exp((G1 + M)(t - tau))."""
    points = np.atleast_2d(points)
    lhs = np.array([exponential_weight(coeffs, tau, t, x, dt) for tau, t, x in points])
    rhs = np.exp((coeffs.G1 + coeffs.M) * (points[:, 1] - points[:, 0])) * (1 + 1e-10)
    return InequalityReport("weight-bound", lhs, rhs, 0.0)
