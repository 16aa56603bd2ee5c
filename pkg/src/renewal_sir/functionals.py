"""Campaign cost and effect functionals on a simulated trajectory.

Step-function controls and weights are handled cell by cell with their
one-sided values, so a break on a mesh node costs no quadrature error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import GridFunction
from .sir_model import AgeTriggered, Policy, TimeTriggered, Trajectory, one_sided


class FunctionalError(ValueError):
    """Policy and trajectory do not fit together."""


def _ones(t, a):
    return np.ones(np.broadcast(np.asarray(t, float), np.asarray(a, float)).shape)


@dataclass(frozen=True)
class EffectWeight:
    """Weight phi(t, a) of the infected count; phi = 1 by default."""

    phi: Callable[[np.ndarray, np.ndarray], np.ndarray] = _ones
    allow_signed: bool = False

    def sample(self, t: float, ages: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.phi(t, ages), dtype=float) * np.ones(ages.size)
        if not np.all(np.isfinite(vals)):
            raise FunctionalError(f"effect weight is not finite at t = {t:g}")
        if not self.allow_signed and vals.min() < 0:
            raise FunctionalError(f"effect weight is negative at t = {t:g}; set allow_signed")
        return vals


def _time_integral(control: Callable, times: np.ndarray, values: np.ndarray) -> float:
    """int control(t) values(t) dt, trapezoid per cell with one-sided control values."""
    dt = times[1] - times[0]
    right, left = one_sided(control, times, dt)
    return float(0.5 * dt * (right[:-1] * values[:-1] + left[1:] * values[1:]).sum())


def _age_integral(weight_right: np.ndarray, weight_left: np.ndarray, u: GridFunction) -> float:
    return float(0.5 * u.dx * (weight_right[:-1] * u.right[:-1] + weight_left[1:] * u.left[1:]).sum())


def _age_policy(trajectory: Trajectory, policy: Policy | None) -> AgeTriggered:
    policy = trajectory.policy if policy is None else policy
    if not isinstance(policy, AgeTriggered):
        raise FunctionalError("this cost needs an age-triggered policy")
    if tuple(policy.ages) != tuple(trajectory.grid.interfaces):
        raise FunctionalError(f"policy ages {policy.ages} differ from trajectory interfaces {trajectory.grid.interfaces}")
    return policy


def _age_cost(trajectory: Trajectory, policy: Policy | None, whole: bool) -> float:
    policy = _age_policy(trajectory, policy)
    if trajectory.times.size < 2:
        return 0.0
    total = 0.0
    for j, eta in enumerate(policy.controls):
        k = trajectory.grid.interface_nodes[j]
        trace = trajectory.S.left[:, k]
        if whole:
            trace = trace + trajectory.I.left[:, k] + trajectory.R.left[:, k]
        total += _time_integral(eta, trajectory.times, trace)
    return total


def cost_age_susceptible(trajectory: Trajectory, policy: Policy | None = None) -> float:
    """Doses given at the vaccination ages: sum_j int eta_j(t) S(t, abar_j-) dt."""
    return _age_cost(trajectory, policy, whole=False)


def cost_age_whole(trajectory: Trajectory, policy: Policy | None = None) -> float:
    """As cost_age_susceptible, with S + I + R in place of S."""
    return _age_cost(trajectory, policy, whole=True)


def _time_cost(trajectory: Trajectory, policy: Policy | None, whole: bool) -> float:
    policy = trajectory.policy if policy is None else policy
    if not isinstance(policy, TimeTriggered):
        raise FunctionalError("this cost needs a time-triggered policy")
    grid = trajectory.grid
    total = 0.0
    for tbar, nu in zip(policy.times, policy.controls):
        state = trajectory.pre_jump.get(float(tbar))
        if state is None:
            raise FunctionalError(f"trajectory has no pre-campaign state at t = {tbar:g}")
        u = state.total() if whole else state.S
        nu_r, nu_l = one_sided(nu, grid.ages, grid.dx)
        total += _age_integral(nu_r, nu_l, u)
    return total


def cost_time_susceptible(trajectory: Trajectory, policy: Policy | None = None) -> float:
    """sum_k int nu_k(a) S(tbar_k-, a) da."""
    return _time_cost(trajectory, policy, whole=False)


def cost_time_whole(trajectory: Trajectory, policy: Policy | None = None) -> float:
    """sum_k int nu_k(a) (S + I + R)(tbar_k-, a) da."""
    return _time_cost(trajectory, policy, whole=True)


COSTS = {
    "age_susceptible": cost_age_susceptible,
    "age_whole": cost_age_whole,
    "time_susceptible": cost_time_susceptible,
    "time_whole": cost_time_whole,
}


def effect(trajectory: Trajectory, weight: EffectWeight | None = None) -> float:
    """Weighted infected count, int_0^T int phi I da dt.

    Trapezoid in age with both traces, then trapezoid in time with the
    weight taken from the right at the start of each step and from the left
    at its end.
    """
    weight = EffectWeight() if weight is None else weight
    times = trajectory.times
    if times.size < 2:
        return 0.0
    dt = times[1] - times[0]
    eps = 1e-9 * dt
    ages = trajectory.grid.ages
    dx = trajectory.grid.dx
    start = np.empty(times.size)  # weight at t+
    end = np.empty(times.size)  # weight at t-
    for n, t in enumerate(times):
        u = trajectory.I.at(n)
        for out, tt in ((start, t + eps), (end, t - eps)):
            w_r, w_l = one_sided(lambda a, tt=tt: weight.sample(tt, a), ages, dx)
            out[n] = _age_integral(w_r, w_l, u)
    return float(0.5 * dt * (start[:-1] + end[1:]).sum())
