"""Vaccination strategies by exact-penalty pattern search.

Controls are piecewise constant: for age-triggered campaigns each eta_j is
constant on ``bins`` equal time bins over [0, T]; for time-triggered ones
each nu_k is constant on ``bins`` equal age bins over [0, age_max].  The
search minimizes

    primary + rho * max(0, constraint - cap)

over the box [0, 1]^d, with cost and effect swapping roles between the two
problem directions.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .functionals import COSTS, EffectWeight, effect
from .sir_model import AgeTriggered, Policy, Scenario, TimeTriggered, piecewise_constant, simulate

log = logging.getLogger(__name__)

MIN_COST = "min_cost"  # minimize cost subject to effect <= cap
MIN_EFFECT = "min_effect"  # minimize effect subject to cost <= cap
INITIAL_STEP = 0.25
SHRINK = 0.5
MIN_STEP = 1e-3
RHO0 = 10.0
RHO_GROWTH = 10.0
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class ControlVector:
    """Control parameters of shape (campaigns, bins), every entry in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.clip(np.array(self.values, dtype=float), 0.0, 1.0)
        if v.ndim != 2:
            raise ValueError("control values must be a (campaigns, bins) array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @staticmethod
    def zeros(campaigns: int, bins: int) -> "ControlVector":
        return ControlVector(np.zeros((campaigns, bins)))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def key(self) -> bytes:
        return self.values.tobytes()


@dataclass(frozen=True)
class OptimizationProblem:
    """One of the two constrained problems over a scenario template.

    The template's policy supplies the campaign ages or times; its controls
    are replaced by the candidate.
    """

    scenario: Scenario
    direction: str
    cap: float
    cost: str = "age_susceptible"
    bins: int = 1
    weight: EffectWeight = EffectWeight()
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.direction not in (MIN_COST, MIN_EFFECT):
            raise ValueError(f"direction must be {MIN_COST!r} or {MIN_EFFECT!r}")
        if self.cost not in COSTS:
            raise ValueError(f"unknown cost {self.cost!r}; choose from {sorted(COSTS)}")
        if not self.cap >= 0:
            raise ValueError("cap must be nonnegative")
        if self.bins < 1:
            raise ValueError("bins must be positive")
        age = isinstance(self.scenario.policy, AgeTriggered)
        if age != self.cost.startswith("age"):
            raise ValueError(f"cost {self.cost!r} does not match the policy variant")

    @property
    def positions(self) -> tuple[float, ...]:
        p = self.scenario.policy
        return tuple(p.ages if isinstance(p, AgeTriggered) else p.times)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.positions), self.bins

    @property
    def dimension(self) -> int:
        return self.shape[0] * self.shape[1]

    def bin_edges(self) -> np.ndarray:
        s = self.scenario
        end = s.horizon if isinstance(s.policy, AgeTriggered) else s.grid.age_max
        return np.linspace(0.0, end, self.bins + 1)

    def policy(self, control: ControlVector) -> Policy:
        if control.values.shape != self.shape:
            raise ValueError(f"control shape {control.values.shape} != {self.shape}")
        breaks = self.bin_edges()[:-1]
        controls = tuple(piecewise_constant(breaks, row) for row in control.values)
        if isinstance(self.scenario.policy, AgeTriggered):
            return AgeTriggered(self.positions, controls)
        return TimeTriggered(self.positions, controls)


@dataclass(frozen=True)
class Evaluation:
    cost: float
    effect: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def evaluate(problem: OptimizationProblem, control: ControlVector) -> Evaluation:
    """Simulate with ``control`` and return its (cost, effect).

    A failed simulation yields infinite cost and effect and the error text.
    """
    try:
        scenario = problem.scenario.with_policy(problem.policy(control))
        traj = simulate(scenario, **problem.solver)
        if not traj.completed:
            raise RuntimeError(f"blow-up at t = {traj.blowup.time:.6g}")
        return Evaluation(COSTS[problem.cost](traj), effect(traj, problem.weight))
    except Exception as exc:  # noqa: BLE001 - any failure marks the candidate infeasible
        log.warning("evaluation failed: %s", exc)
        return Evaluation(math.inf, math.inf, f"{type(exc).__name__}: {exc}")


def objective_parts(problem: OptimizationProblem, ev: Evaluation) -> tuple[float, float]:
    """(primary value, constraint excess over the cap)."""
    if problem.direction == MIN_COST:
        return ev.cost, ev.effect - problem.cap
    return ev.effect, ev.cost - problem.cap


@dataclass(frozen=True)
class HistoryEntry:
    index: int
    control: np.ndarray
    cost: float
    effect: float
    primary: float
    violation: float
    feasible: bool
    rho: float
    best_feasible: float
    error: str | None = None


@dataclass
class SolveResult:
    control: ControlVector
    cost: float
    effect: float
    objective: float
    feasible: bool
    history: list[HistoryEntry]
    rho: float

    @property
    def evaluations(self) -> int:
        return len(self.history)


def worker_count() -> int:
    """Threads for candidate evaluation; RENEWAL_SIR_THREADS caps it, 0 means sequential."""
    env = os.environ.get("RENEWAL_SIR_THREADS")
    default = min(4, os.cpu_count() or 1)
    if env is None or env.strip() == "":
        return default
    n = int(env)
    return 1 if n <= 0 else n


class _Search:
    def __init__(self, problem: OptimizationProblem, budget: int, workers: int):
        self.problem = problem
        self.budget = budget
        self.workers = workers
        self.cache: dict[bytes, Evaluation] = {}
        self.history: list[HistoryEntry] = []
        self.rho = RHO0
        self.best_feasible = math.inf
        self.best_feasible_x: ControlVector | None = None
        self.least_violating: tuple[float, float, ControlVector] | None = None

    @property
    def left(self) -> int:
        return self.budget - len(self.history)

    def penalized(self, ev: Evaluation) -> float:
        if ev.failed:
            return math.inf
        primary, excess = objective_parts(self.problem, ev)
        return primary + self.rho * max(0.0, excess)

    def run(self, points: Sequence[ControlVector]) -> list[Evaluation | None]:
        """Evaluate new points in order while budget lasts; None marks skipped ones."""
        fresh: list[ControlVector] = []
        seen = set()
        for x in points:
            k = x.key()
            if k not in self.cache and k not in seen and len(fresh) < self.left:
                fresh.append(x)
                seen.add(k)
        if fresh:
            if self.workers > 1 and len(fresh) > 1:
                with ThreadPoolExecutor(self.workers) as pool:
                    results = list(pool.map(lambda x: evaluate(self.problem, x), fresh))
            else:
                results = [evaluate(self.problem, x) for x in fresh]
            for x, ev in zip(fresh, results):
                self.cache[x.key()] = ev
                self.record(x, ev)
        return [self.cache.get(x.key()) for x in points]

    def record(self, x: ControlVector, ev: Evaluation):
        primary, excess = objective_parts(self.problem, ev)
        feasible = not ev.failed and excess <= FEAS_TOL
        if feasible and primary < self.best_feasible:
            self.best_feasible = primary
            self.best_feasible_x = x
        if not ev.failed:
            viol = max(0.0, excess)
            if self.least_violating is None or (viol, primary) < self.least_violating[:2]:
                self.least_violating = (viol, primary, x)
        self.history.append(
            HistoryEntry(
                len(self.history), x.flat.copy(), ev.cost, ev.effect, primary, max(0.0, excess),
                feasible, self.rho, self.best_feasible, ev.error,
            )
        )


def _tangent_directions(polls: dict, problem, d: int) -> list[np.ndarray]:
    """Directions along the estimated constraint boundary, from the last coordinate poll.

    The primary and the constraint are differenced over the poll points; the
    directions follow the descent of the primary projected onto the
    boundary's tangent space, with small pulls to the feasible side.
    """
    if d < 2 or len(polls) < 2 * d:
        return []
    gf = np.zeros(d)
    gc = np.zeros(d)
    for i in range(d):
        plus, minus = polls.get((i, 1)), polls.get((i, -1))
        if plus is None or minus is None or plus[0] is None or minus[0] is None:
            return []
        (ep, hp), (em, hm) = plus, minus
        if ep.failed or em.failed or hp + hm == 0:
            return []
        fp, cp = objective_parts(problem, ep)
        fm, cm = objective_parts(problem, em)
        gf[i] = (fp - fm) / (hp + hm)
        gc[i] = (cp - cm) / (hp + hm)
    norm = np.linalg.norm(gc)
    if norm == 0:
        return []
    n = gc / norm
    t = -(gf - (gf @ n) * n)
    if np.linalg.norm(t) == 0:
        return []
    t /= np.linalg.norm(t)
    return [t - pull * n for pull in (0.0, 0.1, 0.5)]


def solve(problem: OptimizationProblem, budget: int = 500, seed: int = 0, workers: int | None = None) -> SolveResult:
    """Box-projected pattern search on the exact-penalty objective.

    Starts from the zero control with step 0.25.  Each iteration polls
    x +- step e_i (in a seeded order) and moves to the best improvement.
    Without improvement, directions along the estimated constraint boundary
    are polled; if those fail too, rho grows tenfold while the current point
    is infeasible, and the step halves.  When the step falls below 1e-3 the
    search restarts from the best feasible point with a seeded random basis,
    as long as budget remains and the previous round improved anything.
    """
    d = problem.dimension
    if budget < d + 1:
        raise ValueError(f"budget {budget} is below dimension + 1 = {d + 1}")
    rng = np.random.default_rng(seed)
    search = _Search(problem, budget, worker_count() if workers is None else workers)
    shape = problem.shape
    x = ControlVector.zeros(*shape)
    (ev_x,) = search.run([x])
    basis = np.eye(d)
    first_round = True
    while search.left > 0:
        start_best = search.best_feasible
        step = INITIAL_STEP
        while step >= MIN_STEP and search.left > 0:
            order = rng.permutation(d)
            points, labels = [], []
            for i in order:
                for sign in (1, -1):
                    y = np.clip(x.flat + sign * step * basis[i], 0.0, 1.0)
                    points.append(ControlVector(y.reshape(shape)))
                    labels.append((int(i), sign))
            evs = search.run(points)
            f_x = search.penalized(ev_x)
            best_j, best_f = None, f_x
            polls = {}
            for j, (p, ev) in enumerate(zip(points, evs)):
                if ev is None:
                    continue
                moved = float(np.linalg.norm(p.flat - x.flat))
                polls[labels[j]] = (ev, moved)
                f = search.penalized(ev)
                if f < best_f:
                    best_j, best_f = j, f
            if best_j is None:
                dirs = _tangent_directions(polls, problem, d)
                extra = [ControlVector(np.clip(x.flat + step * (basis.T @ v), 0, 1).reshape(shape)) for v in dirs]
                extra_evs = search.run(extra)
                for p, ev in zip(extra, extra_evs):
                    if ev is not None and search.penalized(ev) < best_f:
                        points.append(p)
                        evs.append(ev)
                        best_j, best_f = len(points) - 1, search.penalized(ev)
            if best_j is not None:
                x, ev_x = points[best_j], evs[best_j]
                continue
            _, excess = objective_parts(problem, ev_x) if not ev_x.failed else (0, math.inf)
            if excess > FEAS_TOL:
                search.rho *= RHO_GROWTH
                if any(search.penalized(e) < search.penalized(ev_x) for e in evs if e is not None):
                    continue
            step *= SHRINK
        improved = search.best_feasible < start_best
        if not (first_round or improved) or search.best_feasible_x is None:
            break
        first_round = False
        x = search.best_feasible_x
        ev_x = search.cache[x.key()]
        q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        basis = q.T
    if search.best_feasible_x is not None:
        best = search.best_feasible_x
        feasible = True
    elif search.least_violating is not None:
        best = search.least_violating[2]
        feasible = False
    else:
        best, feasible = ControlVector.zeros(*shape), False
    ev = search.cache[best.key()] if best.key() in search.cache else evaluate(problem, best)
    primary, _ = objective_parts(problem, ev)
    return SolveResult(best, ev.cost, ev.effect, primary, feasible, search.history, search.rho)


def grid_search(problem: OptimizationProblem, points_per_axis: int = 21) -> tuple[ControlVector | None, float]:
    """Best feasible primary over the regular lattice of the control box (d <= 3)."""
    d = problem.dimension
    if d > 3:
        raise ValueError("grid search is meant for d <= 3")
    axis = np.linspace(0.0, 1.0, points_per_axis)
    best, best_val = None, math.inf
    for combo in np.array(np.meshgrid(*[axis] * d, indexing="ij")).reshape(d, -1).T:
        x = ControlVector(combo.reshape(problem.shape))
        ev = evaluate(problem, x)
        if ev.failed:
            continue
        primary, excess = objective_parts(problem, ev)
        if excess <= FEAS_TOL and primary < best_val:
            best, best_val = x, primary
    return best, best_val


def with_cap(problem: OptimizationProblem, cap: float) -> OptimizationProblem:
    return replace(problem, cap=cap)
