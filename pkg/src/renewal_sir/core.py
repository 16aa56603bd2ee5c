"""Grids, piecewise-linear grid functions, norms and BV utilities.

Every density in the package is stored on a uniform age mesh as a pair of
arrays: ``left`` holds the limit from the left at each node and ``values``
the limit from the right.  The two coincide except at nodes carrying a jump
(vaccination interfaces, the characteristic through the origin, restarts).
Between nodes the function is linear, from ``values[k]`` to ``left[k + 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

ALIGN_TOL = 1e-9


def _as_index(value: float, what: str) -> int:
    k = int(round(value))
    if abs(value - k) > ALIGN_TOL * max(1.0, abs(value)):
        raise ValueError(f"{what} = {value!r} is not aligned with the mesh")
    return k


@dataclass(frozen=True)
class Grid:
    """Segmented age mesh plus the matching time mesh.

    ``segment_bounds`` lists the interior interface ages (vaccination ages);
    the outer bounds 0 and ``age_max`` are added automatically.  The time
    step equals the age cell width so that unit-speed characteristics pass
    through mesh nodes.
    """

    age_max: float
    cells_per_unit_age: int
    time_horizon: float
    interfaces: tuple[float, ...] = ()

    def __post_init__(self):
        if self.cells_per_unit_age <= 0:
            raise ValueError("cells_per_unit_age must be positive")
        if self.age_max <= 0 or self.time_horizon < 0:
            raise ValueError("age_max must be positive and time_horizon nonnegative")
        object.__setattr__(self, "interfaces", tuple(float(a) for a in self.interfaces))
        _as_index(self.age_max * self.cells_per_unit_age, "age_max * cells_per_unit_age")
        _as_index(self.time_horizon * self.cells_per_unit_age, "time_horizon * cells_per_unit_age")
        bounds = self.segment_bounds
        if np.any(np.diff(bounds) <= 0):
            raise ValueError(f"segment bounds must be strictly increasing: {bounds}")
        for a in self.interfaces:
            _as_index(a * self.cells_per_unit_age, f"interface age {a}")

    @property
    def segment_bounds(self) -> tuple[float, ...]:
        return (0.0, *self.interfaces, float(self.age_max))

    @property
    def dx(self) -> float:
        return 1.0 / self.cells_per_unit_age

    @property
    def dt(self) -> float:
        return self.dx

    @property
    def n_cells(self) -> int:
        return int(round(self.age_max * self.cells_per_unit_age))

    @property
    def n_steps(self) -> int:
        return int(round(self.time_horizon * self.cells_per_unit_age))

    @property
    def ages(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.dx

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def interface_nodes(self) -> tuple[int, ...]:
        return tuple(int(round(a * self.cells_per_unit_age)) for a in self.interfaces)

    @property
    def segment_nodes(self) -> tuple[int, ...]:
        """Node indices of all segment bounds, 0 and the last node included."""
        return (0, *self.interface_nodes, self.n_cells)

    def time_index(self, t: float) -> int:
        return _as_index(t * self.cells_per_unit_age, f"time {t}")

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """Sample a continuous callable at the age nodes."""
        values = np.asarray(func(self.ages), dtype=float) * np.ones(self.n_cells + 1)
        return GridFunction(values, self.dx)

    def refined(self, factor: int) -> "Grid":
        return Grid(self.age_max, self.cells_per_unit_age * factor, self.time_horizon, self.interfaces)


@dataclass(frozen=True)
class GridFunction:
    """Piecewise-linear function of age with double-valued nodes."""

    values: np.ndarray
    dx: float
    left: np.ndarray = field(default=None)
    x0: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a grid function needs at least two nodes")
        left = values.copy() if self.left is None else np.array(self.left, dtype=float)
        if left.shape != values.shape:
            raise ValueError("left traces must match values in length")
        values.setflags(write=False)
        left.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "left", left)

    @property
    def right(self) -> np.ndarray:
        return self.values

    @property
    def n_nodes(self) -> int:
        return self.values.size

    @property
    def ages(self) -> np.ndarray:
        return self.x0 + np.arange(self.n_nodes) * self.dx

    @property
    def length(self) -> float:
        return (self.n_nodes - 1) * self.dx

    def jump_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.left != self.values)

    def interface_traces(self, nodes: Sequence[int]) -> list[tuple[float, float]]:
        return [(float(self.left[k]), float(self.values[k])) for k in nodes]

    def l1(self) -> float:
        return l1_norm(self)

    def linf(self) -> float:
        return linf_norm(self)

    def tv(self) -> float:
        return total_variation(self)

    def integral(self) -> float:
        return float(0.5 * self.dx * (self.values[:-1] + self.left[1:]).sum())

    def __call__(self, x) -> np.ndarray:
        """Evaluate the piecewise-linear representative; zero outside the mesh."""
        x = np.asarray(x, dtype=float)
        s = (x - self.x0) / self.dx
        k = np.clip(np.floor(s).astype(int), 0, self.n_nodes - 2)
        theta = s - k
        out = self.values[k] + theta * (self.left[k + 1] - self.values[k])
        return np.where((s < -1e-12) | (s > self.n_nodes - 1 + 1e-12), 0.0, out)

    def map(self, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return GridFunction(func(self.values), self.dx, func(self.left), self.x0)

    def combine(self, other: "GridFunction", op: Callable) -> "GridFunction":
        if other.n_nodes != self.n_nodes or not np.isclose(other.dx, self.dx):
            raise ValueError("grid functions live on different meshes")
        return GridFunction(op(self.values, other.values), self.dx, op(self.left, other.left), self.x0)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            return self.combine(other, np.add)
        return self.map(lambda v: v + other)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            return self.combine(other, np.subtract)
        return self.map(lambda v: v - other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            return self.combine(other, np.multiply)
        return self.map(lambda v: v * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self.map(np.negative)


def l1_norm(f: GridFunction) -> float:
    """Trapezoid rule for the integral of |f|, respecting jumps at nodes."""
    return float(0.5 * f.dx * (np.abs(f.values[:-1]) + np.abs(f.left[1:])).sum())


def linf_norm(f: GridFunction) -> float:
    return float(max(np.abs(f.values).max(), np.abs(f.left).max()))


def total_variation(f: GridFunction) -> float:
    """Sum of nodal increments plus the magnitude of every nodal jump."""
    inner = np.abs(f.left[1:] - f.values[:-1]).sum()
    jumps = np.abs(f.values - f.left).sum()
    return float(inner + jumps)


def trapezoid(values: np.ndarray, dx: float, axis: int = -1) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    first = np.take(values, 0, axis=axis)
    last = np.take(values, -1, axis=axis)
    return dx * (values.sum(axis=axis) - 0.5 * (first + last))


def cumulative_trapezoid(values: np.ndarray, dx: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * dx * (values[1:] + values[:-1]))
    return out


def sequence_tv(values: np.ndarray) -> float:
    """Total variation of a sampled one-dimensional sequence."""
    return float(np.abs(np.diff(np.asarray(values, dtype=float))).sum())


@dataclass(frozen=True)
class InequalityReport:
    """Both sides of a checked inequality ``lhs <= rhs`` (arrays allowed)."""

    name: str
    lhs: np.ndarray | float
    rhs: np.ndarray | float
    tol: float = 1e-12
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        lhs = np.asarray(self.lhs, dtype=float)
        rhs = np.asarray(self.rhs, dtype=float)
        return bool(np.all(lhs <= rhs + self.tol))

    @property
    def worst_margin(self) -> float:
        """Smallest ``rhs - lhs``; negative values flag violations."""
        lhs = np.asarray(self.lhs, dtype=float)
        rhs = np.asarray(self.rhs, dtype=float)
        return float(np.min(rhs - lhs)) if lhs.size else float("inf")

    def __str__(self):
        status = "holds" if self.holds else "VIOLATED"
        lhs = np.max(self.lhs) if np.size(self.lhs) else 0.0
        return f"{self.name}: max lhs={lhs:.6g}, margin={self.worst_margin:.6g} ({status})"


def _rel_tol(*scales: float, tol: float = 1e-12) -> float:
    return tol * max(1.0, *[abs(s) for s in scales])


def check_bv_product_inequality(u: GridFunction, w: GridFunction) -> InequalityReport:
    """TV(u w) <= TV(u) |w|_inf + |u|_inf TV(w)."""
    lhs = total_variation(u * w)
    rhs = total_variation(u) * linf_norm(w) + linf_norm(u) * total_variation(w)
    return InequalityReport("tv-product", lhs, rhs, _rel_tol(lhs, rhs))


def check_bv_composition_inequality(
    phi: Callable[..., np.ndarray], lipschitz: float, components: Sequence[GridFunction]
) -> InequalityReport:
    """TV(phi o u) <= Lip(phi) TV(u) for vector u, using the 1-norm on R^n.

    ``phi`` receives one array per component and must be Lipschitz with
    constant ``lipschitz`` with respect to the 1-norm.
    """
    first = components[0]
    composed = GridFunction(
        phi(*[c.values for c in components]), first.dx, phi(*[c.left for c in components])
    )
    inner = sum(np.abs(c.left[1:] - c.values[:-1]) for c in components).sum()
    jumps = sum(np.abs(c.values - c.left) for c in components).sum()
    lhs = total_variation(composed)
    rhs = lipschitz * float(inner + jumps)
    return InequalityReport("tv-composition", lhs, rhs, _rel_tol(lhs, rhs))


def check_bv_quotient_inequality(u: GridFunction, w: GridFunction, w_min: float) -> InequalityReport:
    """TV(u / w) <= TV(u) / w_min + TV(w) |u|_inf / w_min**2, for w >= w_min > 0."""
    if min(w.values.min(), w.left.min()) < w_min:
        raise ValueError("denominator falls below the declared lower bound")
    lhs = total_variation(u.combine(w, np.divide))
    rhs = total_variation(u) / w_min + total_variation(w) * linf_norm(u) / w_min**2
    return InequalityReport("tv-quotient", lhs, rhs, _rel_tol(lhs, rhs))


def check_bv_time_integral_inequality(family: Sequence[GridFunction], dt: float) -> InequalityReport:
    """TV of the time integral is at most the time integral of TV (trapezoid in time)."""
    n = len(family)
    weights = np.full(n, dt)
    weights[[0, -1]] = 0.5 * dt
    right = sum(wt * f.values for wt, f in zip(weights, family))
    left = sum(wt * f.left for wt, f in zip(weights, family))
    lhs = total_variation(GridFunction(right, family[0].dx, left))
    rhs = float(sum(wt * total_variation(f) for wt, f in zip(weights, family)))
    return InequalityReport("tv-time-integral", lhs, rhs, _rel_tol(lhs, rhs))


def check_bv_shift_inequality(u: GridFunction, shifts: np.ndarray) -> InequalityReport:
    """Integral of |u(x + delta(x)) - u(x)| <= TV(u) |delta|_inf.

    ``shifts`` are nonnegative integer node offsets per node, so that
    delta = shifts * dx; nodes past the end read the last value.  The left
    side uses the nodal Riemann sum, for which the bound is exact.
    """
    shifts = np.asarray(shifts, dtype=int)
    if shifts.shape != u.values.shape or np.any(shifts < 0):
        raise ValueError("shifts must be nonnegative node offsets, one per node")
    idx = np.minimum(np.arange(u.n_nodes) + shifts, u.n_nodes - 1)
    # node-valued representative: only right traces enter the Riemann sum
    lhs = float(u.dx * np.abs(u.values[idx] - u.values).sum())
    tv_nodes = sequence_tv(u.values)
    rhs = tv_nodes * shifts.max() * u.dx
    return InequalityReport("tv-shift", lhs, rhs, _rel_tol(lhs, rhs))


def check_incubo_inequality(u: np.ndarray, tmax: float) -> InequalityReport:
    """Check TV(U; J) <= |u|_inf tmax + int_J TV(u(tau, .)) dtau.

    ``u[i, j]`` samples u(tau_i, t_j) on a uniform square grid of
    [0, tmax]^2 and U(t_j) is the trapezoid integral of u(., t_j) on
    [0, t_j].
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("u must be sampled on a square grid")
    n = u.shape[0]
    dt = tmax / (n - 1)
    U = np.array([trapezoid(u[: j + 1, j], dt) if j > 0 else 0.0 for j in range(n)])
    lhs = sequence_tv(U)
    tv_rows = np.abs(np.diff(u, axis=1)).sum(axis=1)
    rhs = float(np.abs(u).max() * tmax + trapezoid(tv_rows, dt))
    return InequalityReport("incubo", lhs, rhs, _rel_tol(lhs, rhs), {"U": U})


@dataclass(frozen=True)
class History:
    """Time-indexed family of grid functions sharing one age mesh.

    ``right[n, k]`` and ``left[n, k]`` are the right and left traces at
    time ``times[n]`` and node ``k``.
    """

    times: np.ndarray
    dx: float
    right: np.ndarray
    left: np.ndarray

    def __post_init__(self):
        if self.right.shape != self.left.shape or self.right.shape[0] != len(self.times):
            raise ValueError("history arrays do not match the time mesh")

    @property
    def n_times(self) -> int:
        return len(self.times)

    @property
    def n_nodes(self) -> int:
        return self.right.shape[1]

    def at(self, n: int) -> GridFunction:
        return GridFunction(self.right[n], self.dx, self.left[n])

    def l1(self) -> np.ndarray:
        return 0.5 * self.dx * (np.abs(self.right[:, :-1]) + np.abs(self.left[:, 1:])).sum(axis=1)

    def integral(self) -> np.ndarray:
        return 0.5 * self.dx * (self.right[:, :-1] + self.left[:, 1:]).sum(axis=1)

    def linf(self) -> np.ndarray:
        return np.maximum(np.abs(self.right).max(axis=1), np.abs(self.left).max(axis=1))

    def tv(self) -> np.ndarray:
        inner = np.abs(self.left[:, 1:] - self.right[:, :-1]).sum(axis=1)
        return inner + np.abs(self.right - self.left).sum(axis=1)

    def minimum(self) -> float:
        return float(min(self.right.min(), self.left.min()))

    def l1_distance(self, other: "History") -> np.ndarray:
        """Per-time L1 distance to another history on the same mesh."""
        dr = np.abs(self.right - other.right)
        dl = np.abs(self.left - other.left)
        return 0.5 * self.dx * (dr[:, :-1] + dl[:, 1:]).sum(axis=1)

    def slice(self, start: int, stop: int | None = None) -> "History":
        stop = self.n_times if stop is None else stop
        return History(self.times[start:stop], self.dx, self.right[start:stop], self.left[start:stop])

    @staticmethod
    def concatenate(parts: Sequence["History"]) -> "History":
        """Join consecutive histories; each later part repeats its first time."""
        times = [parts[0].times]
        right = [parts[0].right]
        left = [parts[0].left]
        for p in parts[1:]:
            times.append(p.times[1:])
            right.append(p.right[1:])
            left.append(p.left[1:])
        return History(np.concatenate(times), parts[0].dx, np.concatenate(right), np.concatenate(left))
