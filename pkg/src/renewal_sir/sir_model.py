"""Age-structured SIR dynamics with vaccination, mapped onto the coupled solver.

    S_t + S_a = -S * int lambda(a, a') I(t, a') da' - d_S S
    I_t + I_a =  S * int lambda(a, a') I(t, a') da' - (d_I + r_I) I
    R_t + R_a =  r_I I - d_R R

Age-triggered campaigns move a fraction eta_j(t) of the susceptibles
crossing age abar_j into R.  The age axis is cut at the vaccination ages and
each segment carries its own S, I, R triple, so the jump becomes a boundary
condition of the next segment.  Time-triggered campaigns move nu_k(a) S into
R at the instant tbar_k; the solver restarts from the updated state.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import Grid, GridFunction, History
from .coupled_ibvp import (
    BlowupDiagnostic,
    FixedPointReport,
    FP_TOL,
    SystemConstants,
    SystemSpec,
    solve_global,
)

log = logging.getLogger(__name__)

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]
COMPARTMENTS = ("S", "I", "R")
SAMPLE_NODES = 401
SAMPLE_TIMES = 101
LIP_SLACK = 1e-6


class ScenarioError(ValueError):
    """The scenario cannot be simulated as configured."""


def _zero_rate(t, a):
    return np.zeros(np.broadcast(np.asarray(t, float), np.asarray(a, float)).shape)


def _zero_flux(t):
    return np.zeros_like(np.asarray(t, dtype=float))


# ---------------------------------------------------------------- ingredients


@dataclass(frozen=True)
class Kernel:
    """Contact kernel lambda(a, a').

    ``factors = (p, q)`` marks a separable kernel p(a) q(a'); the infection
    pressure then costs one dot product per time instead of a dense product.
    Declared bounds default to infinity, meaning "take the sampled value".
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    Lambda_inf: float = math.inf
    Lambda_L: float = math.inf
    factors: tuple[Callable, Callable] | None = None

    @staticmethod
    def constant(c: float, **declared) -> "Kernel":
        one = lambda a: np.ones_like(np.asarray(a, dtype=float))  # noqa: E731
        return Kernel(lambda a, ap: c * one(a) * one(ap), factors=(lambda a: c * one(a), one), **declared)

    @staticmethod
    def separable(p: Callable, q: Callable, **declared) -> "Kernel":
        return Kernel(lambda a, ap: p(a) * q(ap), factors=(p, q), **declared)

    def evaluate(self, a: np.ndarray, ap: np.ndarray) -> np.ndarray:
        """Kernel on the tensor mesh, rows indexed by a."""
        a, ap = np.asarray(a, float), np.asarray(ap, float)
        if self.factors is not None:
            p, q = self.factors
            return np.outer(np.asarray(p(a), float) * np.ones(a.size), np.asarray(q(ap), float) * np.ones(ap.size))
        return np.asarray(self.func(a[:, None], ap[None, :]), dtype=float) * np.ones((a.size, ap.size))


class _Pressure:
    """Applies c -> sum_k lambda(a, a'_k) c_k for node weights c of shape (K + 1, nodes)."""

    def __init__(self, kernel: Kernel, ages: np.ndarray):
        if kernel.factors is not None:
            p, q = kernel.factors
            self.p = np.asarray(p(ages), float) * np.ones(ages.size)
            self.q = np.asarray(q(ages), float) * np.ones(ages.size)
            self.matrix = None
        else:
            self.matrix = kernel.evaluate(ages, ages)

    def __call__(self, c: np.ndarray) -> np.ndarray:
        if self.matrix is None:
            return np.outer(c @ self.q, self.p)
        return c @ self.matrix.T


@dataclass(frozen=True)
class Rates:
    """Mortality and recovery rates as functions of (t, a)."""

    d_S: Field = _zero_rate
    d_I: Field = _zero_rate
    d_R: Field = _zero_rate
    r_I: Field = _zero_rate
    R_L: float = math.inf
    R_1: float = math.inf
    R_inf: float = math.inf

    def items(self):
        return (("d_S", self.d_S), ("d_I", self.d_I), ("d_R", self.d_R), ("r_I", self.r_I))


def constant_rate(value: float) -> Field:
    return lambda t, a: value + _zero_rate(t, a)


ONE_SIDED_EPS = 1e-9


def one_sided(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Right and left limits of ``func`` at the nodes ``x`` of a mesh of width h.

    Evaluated at x +- 1e-9 h, so step functions with breaks on the mesh get
    their one-sided values and smooth functions are unaffected.
    """
    x = np.asarray(x, dtype=float)
    eps = ONE_SIDED_EPS * h
    ones = np.ones(x.size)
    return np.asarray(func(x + eps), float) * ones, np.asarray(func(x - eps), float) * ones


def piecewise_constant(breaks: Sequence[float], values: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    """Right-continuous step function equal to values[k] on [breaks[k], breaks[k+1])."""
    breaks = np.asarray(breaks, dtype=float)
    values = np.asarray(values, dtype=float)
    if breaks.size != values.size:
        raise ValueError("need one value per break")

    def step(x):
        k = np.searchsorted(breaks, np.asarray(x, dtype=float), side="right") - 1
        return values[np.clip(k, 0, values.size - 1)]

    return step


@dataclass(frozen=True)
class AgeTriggered:
    """Vaccination at ages ``ages[j]`` with coverage ``controls[j](t)``."""

    ages: tuple[float, ...] = ()
    controls: tuple[Callable, ...] = ()

    def __post_init__(self):
        if len(self.ages) != len(self.controls):
            raise ValueError("one control per vaccination age")


@dataclass(frozen=True)
class TimeTriggered:
    """Vaccination at times ``times[k]`` with coverage ``controls[k](a)``."""

    times: tuple[float, ...] = ()
    controls: tuple[Callable, ...] = ()

    def __post_init__(self):
        if len(self.times) != len(self.controls):
            raise ValueError("one control per vaccination time")


Policy = AgeTriggered | TimeTriggered


@dataclass(frozen=True)
class Scenario:
    grid: Grid
    kernel: Kernel
    rates: Rates
    policy: Policy
    initial: tuple[GridFunction, GridFunction, GridFunction]
    boundary: tuple[Callable, Callable, Callable] = (_zero_flux, _zero_flux, _zero_flux)
    allow_signed_rates: bool = False

    @property
    def horizon(self) -> float:
        return self.grid.time_horizon

    @property
    def mesh(self) -> Grid:
        """The grid cut at the vaccination ages of the policy."""
        ages = self.policy.ages if isinstance(self.policy, AgeTriggered) else ()
        return Grid(self.grid.age_max, self.grid.cells_per_unit_age, self.grid.time_horizon, tuple(ages))

    def with_policy(self, policy: Policy) -> "Scenario":
        return replace(self, policy=policy)


@dataclass(frozen=True)
class SIRState:
    S: GridFunction
    I: GridFunction
    R: GridFunction

    def total(self) -> GridFunction:
        return self.S + self.I + self.R

    def __iter__(self):
        return iter((self.S, self.I, self.R))


# ---------------------------------------------------------------- validation


@dataclass
class Violation:
    name: str
    measured: float
    declared: float
    location: dict = field(default_factory=dict)

    def __str__(self):
        where = ", ".join(f"{k}={v:.6g}" for k, v in self.location.items())
        return f"{self.name}: measured {self.measured:.6g} > declared {self.declared:.6g} at {where}"


@dataclass
class ValidationReport:
    violations: list[Violation]
    warnings: list[str]
    neg_eligible: bool
    sampled: dict

    @property
    def ok(self) -> bool:
        return not self.violations


def _subsample(n: int, limit: int) -> np.ndarray:
    return np.unique(np.linspace(0, n - 1, min(n, limit)).round().astype(int))


def _sample_rate(phi: Field, times: np.ndarray, ages: np.ndarray) -> np.ndarray:
    return np.asarray(phi(times[:, None], ages[None, :]), dtype=float) * np.ones((times.size, ages.size))


def _rows_tv(values: np.ndarray) -> np.ndarray:
    return np.abs(np.diff(values, axis=-1)).sum(axis=-1)


def validate_scenario(scenario: Scenario) -> ValidationReport:
    """Sample every hypothesis on the mesh and list what fails, with locations."""
    violations: list[Violation] = []
    warnings: list[str] = []
    grid = scenario.grid
    ages = grid.ages
    dx = grid.dx
    sampled: dict[str, float] = {}

    try:
        scenario.mesh
    except ValueError as exc:
        return ValidationReport([Violation(f"alignment: {exc}", math.nan, math.nan)], [], False, {})

    # kernel: rows a on the full mesh, columns a' subsampled
    cols = ages[_subsample(ages.size, SAMPLE_NODES)]
    lam = scenario.kernel.evaluate(ages, cols)
    sup = np.abs(lam).max()
    tv = _rows_tv(lam.T)
    bound = sup + tv
    sampled["Lambda_inf"] = float(bound.max())
    if sampled["Lambda_inf"] > scenario.kernel.Lambda_inf * (1 + 1e-12):
        j = int(np.argmax(bound))
        i = int(np.argmax(np.abs(lam[:, j])))
        violations.append(Violation("Lambda_inf", sampled["Lambda_inf"], scenario.kernel.Lambda_inf, {"a": ages[i], "a'": cols[j]}))
    quot = np.abs(np.diff(lam, axis=0)) / dx
    sampled["Lambda_L"] = float(quot.max(initial=0.0))
    if sampled["Lambda_L"] > scenario.kernel.Lambda_L * (1 + LIP_SLACK):
        i, j = np.unravel_index(int(np.argmax(quot)), quot.shape)
        violations.append(Violation("Lambda_L", sampled["Lambda_L"], scenario.kernel.Lambda_L, {"a": ages[i], "a'": cols[j]}))

    # rates
    times = grid.times[_subsample(grid.times.size, SAMPLE_TIMES)]
    rates = scenario.rates
    signed = []
    worst = {"R_inf": 0.0, "R_L": 0.0, "R_1": 0.0}
    for name, phi in rates.items():
        vals = _sample_rate(phi, times, ages)
        if vals.min() < 0:
            n, k = np.unravel_index(int(np.argmin(vals)), vals.shape)
            signed.append(name)
            warnings.append(f"{name} takes the negative value {vals[n, k]:.6g} at t={times[n]:.6g}, a={ages[k]:.6g}")
        checks = {
            "R_inf": np.abs(vals).max() + _rows_tv(vals),
            "R_L": np.abs(np.diff(vals, axis=1)).max(axis=1) / dx,
            "R_1": 0.5 * dx * (np.abs(vals[:, :-1]) + np.abs(vals[:, 1:])).sum(axis=1),
        }
        for key, per_time in checks.items():
            worst[key] = max(worst[key], float(per_time.max()))
            declared = getattr(rates, key)
            slack = LIP_SLACK if key == "R_L" else 1e-12
            if per_time.max() > declared * (1 + slack):
                n = int(np.argmax(per_time))
                violations.append(Violation(f"{key}({name})", float(per_time.max()), declared, {"t": times[n]}))
    sampled.update(worst)
    neg_eligible = not signed

    # data
    for name, u in zip(COMPARTMENTS, scenario.initial):
        if u.n_nodes != ages.size:
            violations.append(Violation(f"{name}_o mesh size", u.n_nodes, ages.size))
            continue
        low = min(u.right.min(), u.left.min())
        if low < 0:
            k = int(np.argmin(np.minimum(u.right, u.left)))
            violations.append(Violation(f"{name}_o nonnegative", -low, 0.0, {"a": ages[k]}))
    for name, b in zip(COMPARTMENTS, scenario.boundary):
        vals = np.asarray(b(grid.times), float) * np.ones(grid.times.size)
        if vals.min() < 0:
            n = int(np.argmin(vals))
            violations.append(Violation(f"{name}_b nonnegative", -vals.min(), 0.0, {"t": grid.times[n]}))

    # policy
    policy = scenario.policy
    if isinstance(policy, AgeTriggered):
        for j, (abar, eta) in enumerate(zip(policy.ages, policy.controls)):
            if not 0 < abar < grid.age_max:
                violations.append(Violation(f"vaccination age {j + 1} inside (0, age_max)", abar, grid.age_max))
            vals = np.concatenate(one_sided(eta, grid.times, grid.dt))
            _unit_interval(violations, f"eta_{j + 1}", vals, np.tile(grid.times, 2), "t")
    else:
        if np.any(np.diff(policy.times) <= 0):
            violations.append(Violation("vaccination times increasing", math.nan, math.nan))
        for k, (tbar, nu) in enumerate(zip(policy.times, policy.controls)):
            try:
                grid.time_index(tbar)
            except ValueError as exc:
                violations.append(Violation(f"alignment: {exc}", tbar, math.nan))
            if not 0 <= tbar < grid.time_horizon:
                violations.append(Violation(f"vaccination time {k + 1} inside [0, horizon)", tbar, grid.time_horizon))
            vals = np.concatenate(one_sided(nu, ages, dx))
            _unit_interval(violations, f"nu_{k + 1}", vals, np.tile(ages, 2), "a")

    # truncation: mass that could reach age_max within the horizon
    total = sum(u.integral() for u in scenario.initial)
    cut = grid.age_max - grid.time_horizon
    if total > 0 and cut > 0:
        tail = sum(float(u.integral() - _mass_below(u, cut)) for u in scenario.initial)
        if tail > 1e-9 * total:
            warnings.append(f"initial mass {tail:.3g} beyond age {cut:.6g} leaves the domain before the horizon")
    return ValidationReport(violations, warnings, neg_eligible, sampled)


def _unit_interval(violations, name, vals, where, label):
    for bad, bound, op in ((vals < 0, 0.0, np.argmin), (vals > 1, 1.0, np.argmax)):
        if np.any(bad):
            k = int(op(vals))
            violations.append(Violation(f"{name} in [0, 1]", float(vals[k]), bound, {label: float(where[k])}))


def _mass_below(u: GridFunction, age: float) -> float:
    k = int(round(age / u.dx))
    return 0.5 * u.dx * float(u.right[:k].sum() + u.left[1 : k + 1].sum())


# ---------------------------------------------------------------- reformulation


def _constants(scenario: Scenario, report: ValidationReport, n_segments: int) -> SystemConstants:
    def pick(declared, key):
        return declared if math.isfinite(declared) else report.sampled[key]

    grid = scenario.grid
    lam_inf = pick(scenario.kernel.Lambda_inf, "Lambda_inf")
    lam_l = pick(scenario.kernel.Lambda_L, "Lambda_L")
    r_inf = pick(scenario.rates.R_inf, "R_inf")
    r_l = pick(scenario.rates.R_L, "R_L")
    flux = [np.abs(np.asarray(b(grid.times), float) * np.ones(grid.times.size)) for b in scenario.boundary]
    b_1 = max(float(0.5 * grid.dt * (f[:-1] + f[1:]).sum()) for f in flux)
    b_inf = max(float(f.max()) for f in flux)
    mass = sum(u.l1() for u in scenario.initial)
    return SystemConstants(
        A_L=lam_inf,
        A_1=lam_inf * grid.age_max,
        A_2=n_segments * lam_l * mass,
        C_L=2 * r_l,
        C_inf=2 * r_inf,
        B_1=b_1,
        B_inf=b_inf,
        B_L=1.0 if n_segments > 1 else 0.0,
    )


def _segment_system(scenario: Scenario, mesh: Grid, etas: Sequence[Callable], report: ValidationReport) -> SystemSpec:
    """SystemSpec with one S, I, R triple per segment of ``mesh``.

    Component 3s + c is compartment c on segment s, in the local age
    x = a - abar_s.  The boundary of segment s >= 1 reads the traces at the
    last node of segment s - 1.
    """
    bounds = mesh.segment_nodes
    n_seg = len(bounds) - 1
    dx = mesh.dx
    nodes = tuple(bounds[s + 1] - bounds[s] + 1 for s in range(n_seg))
    ages = mesh.ages
    pressure = _Pressure(scenario.kernel, ages)
    rates = scenario.rates
    seg_ages = [ages[bounds[s] : bounds[s + 1] + 1] for s in range(n_seg)]
    cache: dict = {}

    def rate_samples(times):
        key = (float(times[0]), times.size)
        if key not in cache:
            cache.clear()
            cache[key] = [
                {name: _sample_rate(phi, times, a) for name, phi in rates.items()} for a in seg_ages
            ]
        return cache[key]

    def alpha(right, left):
        k = right[0].shape[0]
        c = np.zeros((k, ages.size))
        for s in range(n_seg):
            lo, hi = bounds[s], bounds[s + 1]
            i_r, i_l = right[3 * s + 1], left[3 * s + 1]
            c[:, lo:hi] += 0.5 * dx * i_r[:, :-1]
            c[:, lo + 1 : hi + 1] += 0.5 * dx * i_l[:, 1:]
        p = pressure(c)
        out = {}
        for s in range(n_seg):
            ps = p[:, bounds[s] : bounds[s + 1] + 1]
            out[(3 * s, 3 * s)] = -ps
            out[(3 * s + 1, 3 * s)] = ps
        return out

    def gamma(times):
        out = {}
        for s, r in enumerate(rate_samples(times)):
            out[(3 * s, 3 * s)] = -r["d_S"]
            out[(3 * s + 1, 3 * s + 1)] = -(r["d_I"] + r["r_I"])
            out[(3 * s + 2, 3 * s + 1)] = r["r_I"]
            out[(3 * s + 2, 3 * s + 2)] = -r["d_R"]
        return out

    def beta(i, times, traces):
        s, c = divmod(i, 3)
        if s == 0:
            return np.asarray(scenario.boundary[c](times), float) * np.ones(times.size)
        eta = np.asarray(etas[s - 1](times), float) * np.ones(times.size)
        base = 3 * (s - 1)
        if c == 0:
            return (1 - eta) * traces[base]
        if c == 1:
            return traces[base + 1]
        return eta * traces[base] + traces[base + 2]

    deps = [()] * 3
    for s in range(1, n_seg):
        base = 3 * (s - 1)
        deps += [(base,), (base + 1,), (base, base + 2)]
    traces = tuple(nodes[s] - 1 if s < n_seg - 1 else None for s in range(n_seg) for _ in range(3))
    return SystemSpec(
        n=3 * n_seg,
        nodes=tuple(nodes[s] for s in range(n_seg) for _ in range(3)),
        dx=dx,
        alpha=alpha,
        gamma=gamma,
        beta=beta,
        beta_deps=tuple(deps),
        trace_nodes=traces,
        constants=_constants(scenario, report, n_seg),
        pos=True,
        neg=report.neg_eligible,
        names=tuple(f"{c}[{s}]" for s in range(n_seg) for c in COMPARTMENTS),
    )


def _checked(scenario: Scenario) -> ValidationReport:
    report = validate_scenario(scenario)
    if not report.ok:
        raise ScenarioError("invalid scenario:\n" + "\n".join(str(v) for v in report.violations))
    if not report.neg_eligible and not scenario.allow_signed_rates:
        raise ScenarioError("signed rates need allow_signed_rates: " + "; ".join(report.warnings))
    return report


def build_system_age_triggered(scenario: Scenario) -> SystemSpec:
    if not isinstance(scenario.policy, AgeTriggered):
        raise ScenarioError("age-triggered system needs an AgeTriggered policy")
    report = _checked(scenario)
    return _segment_system(scenario, scenario.mesh, scenario.policy.controls, report)


def restart(state: SIRState, nu_right: np.ndarray, nu_left: np.ndarray | None = None) -> SIRState:
    """Move the fraction nu of S into R, nodewise on both traces."""
    nu_left = nu_right if nu_left is None else nu_left
    S = state.S
    moved = GridFunction(S.right * nu_right, S.dx, S.left * nu_left)
    kept = GridFunction(S.right * (1 - nu_right), S.dx, S.left * (1 - nu_left))
    return SIRState(kept, state.I, state.R + moved)


def build_system_time_triggered(scenario: Scenario):
    """Return [(spec, restart, (t_start, t_end))] over the inter-campaign intervals.

    ``restart`` maps the state at t_start- to the initial datum of the
    interval (the identity on the first one).  All intervals share one spec.
    """
    policy = scenario.policy
    if not isinstance(policy, TimeTriggered):
        raise ScenarioError("time-triggered system needs a TimeTriggered policy")
    report = _checked(scenario)
    spec = _segment_system(scenario, scenario.mesh, (), report)
    grid = scenario.grid
    edges = [0.0, *policy.times, scenario.horizon]
    out = [(spec, lambda state: state, (edges[0], edges[1]))]
    for k, nu in enumerate(policy.controls):
        nu_r, nu_l = one_sided(nu, grid.ages, grid.dx)
        out.append((spec, lambda state, r=nu_r, l=nu_l: restart(state, r, l), (edges[k + 1], edges[k + 2])))
    return out


# ---------------------------------------------------------------- simulation


@dataclass
class Trajectory:
    """S, I, R on the full age mesh at every time node.

    At an interface node the left trace comes from the segment below and the
    right trace from the segment above.  Rows at a campaign time hold the
    post-campaign state; ``pre_jump`` keeps the state just before.
    """

    grid: Grid
    policy: Policy
    S: History
    I: History
    R: History
    segments: list[tuple[History, History, History]] | None = None
    pre_jump: dict[float, SIRState] = field(default_factory=dict)
    reports: list[FixedPointReport] = field(default_factory=list)
    blowup: BlowupDiagnostic | None = None

    @property
    def times(self) -> np.ndarray:
        return self.S.times

    @property
    def completed(self) -> bool:
        return self.blowup is None

    @property
    def total_iterations(self) -> int:
        return sum(r.iterations for r in self.reports)

    def compartments(self) -> tuple[History, History, History]:
        return self.S, self.I, self.R

    def state(self, n: int) -> SIRState:
        return SIRState(self.S.at(n), self.I.at(n), self.R.at(n))

    def mass(self) -> np.ndarray:
        return self.S.integral() + self.I.integral() + self.R.integral()

    def interface_traces(self, j: int) -> dict[str, np.ndarray]:
        """Time series of the one-sided values at the j-th vaccination age (0-based)."""
        k = self.grid.interface_nodes[j]
        out = {}
        for name, h in zip(COMPARTMENTS, self.compartments()):
            out[name + "-"] = h.left[:, k]
            out[name + "+"] = h.right[:, k]
        return out


def restrict(trajectory: Trajectory, factor: int) -> tuple[History, History, History]:
    """S, I, R of a run on a ``factor`` times finer mesh, kept at the coarse nodes."""
    out = []
    for h in trajectory.compartments():
        out.append(History(h.times[::factor], h.dx * factor, h.right[::factor, ::factor], h.left[::factor, ::factor]))
    return tuple(out)


def trajectory_distance(coarse: Trajectory, fine: Trajectory) -> float:
    """Sup over the coarse times of the summed S, I, R L1 distances.

    ``fine`` must use an integer multiple of the coarse cells per unit age.
    """
    ratio = fine.grid.cells_per_unit_age / coarse.grid.cells_per_unit_age
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-12:
        raise ValueError("fine mesh must refine the coarse mesh by an integer factor")
    n = min(coarse.times.size, (fine.times.size - 1) // factor + 1)
    total = np.zeros(n)
    for a, b in zip(coarse.compartments(), restrict(fine, factor)):
        total += a.slice(0, n).l1_distance(b.slice(0, n))
    return float(total.max())


def _split(u: GridFunction, bounds: Sequence[int]) -> list[GridFunction]:
    parts = []
    for s in range(len(bounds) - 1):
        lo, hi = bounds[s], bounds[s + 1]
        right = u.right[lo : hi + 1].copy()
        left = u.left[lo : hi + 1].copy()
        if s > 0:
            left[0] = right[0]
        if s < len(bounds) - 2:
            right[-1] = left[-1]
        parts.append(GridFunction(right, u.dx, left))
    return parts


def _join(histories: Sequence[History], bounds: Sequence[int]) -> History:
    k = histories[0].n_times
    right = np.empty((k, bounds[-1] + 1))
    left = np.empty_like(right)
    for s, h in enumerate(histories):
        lo, hi = bounds[s], bounds[s + 1]
        left[:, lo + 1 : hi + 1] = h.left[:, 1:]
        right[:, lo:hi] = h.right[:, :-1]
    left[:, 0] = histories[0].left[:, 0]
    right[:, -1] = histories[-1].right[:, -1]
    return History(histories[0].times, histories[0].dx, right, left)


def _solver_options(options: dict) -> dict:
    allowed = {"fp_tol", "max_iter", "max_window", "blowup_factor"}
    bad = set(options) - allowed
    if bad:
        raise TypeError(f"unknown solver options {sorted(bad)}")
    return options


def segment_initial(scenario: Scenario) -> list[GridFunction]:
    """Initial data of the segmented system, ordered like its components."""
    bounds = scenario.mesh.segment_nodes
    pieces = [_split(u, bounds) for u in scenario.initial]
    return [pieces[c][s] for s in range(len(bounds) - 1) for c in range(3)]


def _simulate_age(scenario: Scenario, options: dict) -> Trajectory:
    spec = build_system_age_triggered(scenario)
    mesh = scenario.mesh
    bounds = mesh.segment_nodes
    start = segment_initial(scenario)
    sol = solve_global(spec, start, scenario.horizon, **options)
    comps = sol.components
    n_seg = len(bounds) - 1
    joined = [_join([comps[3 * s + c] for s in range(n_seg)], bounds) for c in range(3)]
    segments = [tuple(comps[3 * s : 3 * s + 3]) for s in range(n_seg)]
    return Trajectory(mesh, scenario.policy, *joined, segments, {}, sol.reports, sol.blowup)


def _simulate_time(scenario: Scenario, options: dict) -> Trajectory:
    plan = build_system_time_triggered(scenario)
    state = SIRState(*scenario.initial)
    rows: list[list[History]] = []
    pre_jump: dict[float, SIRState] = {}
    reports: list[FixedPointReport] = []
    blowup = None
    for k, (spec, transform, (t0, t1)) in enumerate(plan):
        if k > 0:
            pre_jump[t0] = state
        state = transform(state)
        sol = solve_global(spec, list(state), t1, t_start=t0, **options)
        reports += sol.reports
        if rows:
            # the campaign row replaces the pre-campaign row of the previous interval
            rows[-1] = [h.slice(0, h.n_times - 1) for h in rows[-1]]
        rows.append(sol.components)
        state = SIRState(*sol.state(sol.times.size - 1))
        if sol.blowup is not None:
            blowup = sol.blowup
            break
    joined = [
        History(
            np.concatenate([r[c].times for r in rows]),
            scenario.grid.dx,
            np.concatenate([r[c].right for r in rows]),
            np.concatenate([r[c].left for r in rows]),
        )
        for c in range(3)
    ]
    return Trajectory(scenario.grid, scenario.policy, *joined, None, pre_jump, reports, blowup)


def simulate(scenario: Scenario, **options) -> Trajectory:
    """Solve the SIR system on [0, horizon] under the scenario's policy.

    ``options`` are passed to the global solver (``fp_tol``, ``max_iter``,
    ``max_window``, ``blowup_factor``).
    """
    options = _solver_options(options)
    if isinstance(scenario.policy, AgeTriggered):
        return _simulate_age(scenario, options)
    return _simulate_time(scenario, options)


def zero_scenario(grid: Grid, policy: Policy | None = None) -> Scenario:
    zero = grid.sample(lambda a: 0 * a)
    return Scenario(grid, Kernel.constant(0.0), Rates(), policy or AgeTriggered(), (zero, zero, zero))


__all__ = [
    "AgeTriggered",
    "FP_TOL",
    "Kernel",
    "Rates",
    "SIRState",
    "Scenario",
    "ScenarioError",
    "TimeTriggered",
    "Trajectory",
    "ValidationReport",
    "build_system_age_triggered",
    "build_system_time_triggered",
    "constant_rate",
    "one_sided",
    "piecewise_constant",
    "restart",
    "restrict",
    "segment_initial",
    "simulate",
    "trajectory_distance",
    "validate_scenario",
    "zero_scenario",
]
