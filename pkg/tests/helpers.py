"""Scenario builders shared by the test modules."""
from pathlib import Path

import numpy as np

from renewal_sir.core import Grid
from renewal_sir.sir_model import (
    AgeTriggered,
    Kernel,
    Rates,
    Scenario,
    TimeTriggered,
    piecewise_constant,
)

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
ACCEPTANCE_LINES: list[str] = []


def verdict(number: int, title: str, passed: bool, detail: str) -> bool:
    """Record and print one acceptance line; returns ``passed``."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def _rate(level, slope, wobble):
    return lambda t, a: level + slope * a + wobble * np.sin(t) ** 2 + 0 * a


def random_scenario(seed: int, horizon: float = 5.0, cells: int = 10, age_max: float = 20.0) -> Scenario:
    """Random scenario with nonnegative rates, bounded data and a random policy.

    Mortality is drawn at least 0.01 so that deaths dominate the O(dt^2)
    drift of the trapezoid infection transfer.
    """
    rng = np.random.default_rng(seed)
    grid = Grid(age_max, cells, horizon)
    s_amp, s_width = rng.uniform(1, 10), rng.uniform(3, 8)
    i_amp, i_center = rng.uniform(0.05, 1.0), rng.uniform(2, 10)
    S0 = grid.sample(lambda a: s_amp * np.exp(-a / s_width))
    I0 = grid.sample(lambda a: i_amp * np.exp(-((a - i_center) ** 2)))
    R0 = grid.sample(lambda a: rng.uniform(0, 0.5) * np.exp(-a / 4))
    c, decay = rng.uniform(0.01, 0.3), rng.uniform(3, 10)
    if rng.random() < 0.5:
        kernel = Kernel.separable(lambda a: c * np.exp(-a / decay), lambda a: 1 + 0 * a)
    else:
        kernel = Kernel(lambda a, ap: c * np.exp(-np.abs(a - ap) / decay))
    rates = Rates(
        d_S=_rate(rng.uniform(0.01, 0.05), rng.uniform(0, 0.005), rng.uniform(0, 0.02)),
        d_I=_rate(rng.uniform(0.01, 0.1), rng.uniform(0, 0.005), rng.uniform(0, 0.02)),
        d_R=_rate(rng.uniform(0.01, 0.05), rng.uniform(0, 0.005), rng.uniform(0, 0.02)),
        r_I=_rate(rng.uniform(0.1, 1.0), 0.0, rng.uniform(0, 0.2)),
    )
    b_s = rng.uniform(0, 2)
    boundary = (lambda t: b_s * (1 + 0.5 * np.sin(t)), lambda t: 0 * t, lambda t: 0 * t)
    if rng.random() < 0.5:
        ages = tuple(sorted(rng.choice(np.arange(1, 15), size=2, replace=False).astype(float)))
        controls = tuple(piecewise_constant([0.0, float(rng.integers(1, 5))], rng.uniform(0, 1, 2)) for _ in ages)
        policy = AgeTriggered(ages, controls)
    else:
        times = tuple(sorted(rng.choice(np.arange(1, 10), size=2, replace=False) * horizon / 10))
        controls = tuple(piecewise_constant([0.0, float(rng.integers(1, 10))], rng.uniform(0, 1, 2)) for _ in times)
        policy = TimeTriggered(times, controls)
    return Scenario(grid, kernel, rates, policy, (S0, I0, R0), boundary)


def inflow_integral(scenario: Scenario, times: np.ndarray) -> np.ndarray:
    """Running time integral of the total boundary inflow (trapezoid)."""
    b = sum(np.asarray(f(times), float) * np.ones(times.size) for f in scenario.boundary)
    out = np.zeros(times.size)
    out[1:] = np.cumsum(0.5 * (times[1] - times[0]) * (b[:-1] + b[1:]))
    return out


def two_age_scenario(cells: int = 10) -> Scenario:
    """Fixed scenario with vaccination ages 2 and 5 and a step control."""
    grid = Grid(20.0, cells, 5.0)
    S0 = grid.sample(lambda a: 10 * np.exp(-a / 10))
    I0 = grid.sample(lambda a: 0.1 * np.exp(-((a - 5) ** 2)))
    R0 = grid.sample(lambda a: 0 * a)
    kernel = Kernel.separable(lambda a: 0.05 * np.exp(-a / 10), lambda a: np.exp(-a / 15))
    rates = Rates(
        d_S=lambda t, a: 0.01 + 0 * a,
        d_I=lambda t, a: 0.02 + 0 * a,
        d_R=lambda t, a: 0.01 + 0 * a,
        r_I=lambda t, a: 0.5 + 0 * a,
    )
    policy = AgeTriggered((2.0, 5.0), (piecewise_constant([0], [0.3]), piecewise_constant([0, 2.5], [0.1, 0.6])))
    return Scenario(grid, kernel, rates, policy, (S0, I0, R0), (lambda t: 1 + 0 * t, lambda t: 0 * t, lambda t: 0 * t))
