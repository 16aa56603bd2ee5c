import numpy as np
import pytest

from renewal_sir.core import Grid
from renewal_sir.functionals import (
    EffectWeight,
    FunctionalError,
    cost_age_susceptible,
    cost_age_whole,
    cost_time_susceptible,
    cost_time_whole,
    effect,
)
from renewal_sir.sir_model import AgeTriggered, Kernel, Rates, Scenario, TimeTriggered, piecewise_constant, simulate

ONE = lambda x: 1 + 0 * np.asarray(x, float)  # noqa: E731
HALF = lambda x: 0.5 + 0 * np.asarray(x, float)  # noqa: E731
ZERO = lambda x: 0 * np.asarray(x, float)  # noqa: E731


def stationary(policy, horizon=3.0):
    """No contacts, no rates: S = 1 and I = 0.5 stay constant; R = 0 below any vaccination age."""
    grid = Grid(10.0, 10, horizon)
    initial = (grid.sample(ONE), grid.sample(HALF), grid.sample(ZERO))
    return Scenario(grid, Kernel.constant(0.0), Rates(), policy, initial, (ONE, HALF, ZERO))


def test_age_costs_closed_form():
    eta = piecewise_constant([0.0, 1.5], [0.4, 0.2])
    traj = simulate(stationary(AgeTriggered((2.0,), (eta,))))
    # int_0^3 eta(t) dt = 0.4 * 1.5 + 0.2 * 1.5
    assert cost_age_susceptible(traj) == pytest.approx(0.9, abs=1e-12)
    assert cost_age_whole(traj) == pytest.approx(0.9 * 1.5, abs=1e-12)


def test_time_costs_closed_form():
    nu = piecewise_constant([0.0, 4.0], [0.5, 0.0])
    traj = simulate(stationary(TimeTriggered((1.0,), (nu,))))
    assert cost_time_susceptible(traj) == pytest.approx(2.0, abs=1e-12)
    assert cost_time_whole(traj) == pytest.approx(3.0, abs=1e-12)


def test_two_campaigns_add_up():
    nu = piecewise_constant([0.0, 4.0], [0.5, 0.0])
    traj = simulate(stationary(TimeTriggered((1.0, 2.0), (nu, nu))))
    # the second campaign sees S = 0.5 on ages [1, 4] (vaccinated a year earlier) and 1 on [0, 1)
    assert cost_time_susceptible(traj) == pytest.approx(2.0 + 0.5 * (1.0 + 0.5 * 3.0), abs=1e-12)


def test_effect_closed_form_and_weights():
    traj = simulate(stationary(AgeTriggered()))
    assert effect(traj) == pytest.approx(0.5 * 10.0 * 3.0, rel=1e-12)
    young = EffectWeight(lambda t, a: (np.asarray(a) < 5.0) + 0.0 * np.asarray(t))
    assert effect(traj, young) == pytest.approx(0.5 * 5.0 * 3.0, rel=1e-12)
    early = EffectWeight(lambda t, a: (np.asarray(t) < 1.0) + 0.0 * np.asarray(a))
    assert effect(traj, early) == pytest.approx(0.5 * 10.0 * 1.0, rel=1e-12)


def test_zero_control_costs_nothing():
    traj = simulate(stationary(AgeTriggered((2.0, 4.0), (ZERO, ZERO))))
    assert cost_age_susceptible(traj) == 0.0 and cost_age_whole(traj) == 0.0


def test_mismatched_policy_raises():
    age = simulate(stationary(AgeTriggered((2.0,), (HALF,))))
    with pytest.raises(FunctionalError):
        cost_time_susceptible(age)
    with pytest.raises(FunctionalError):
        cost_age_susceptible(age, AgeTriggered((3.0,), (HALF,)))
    time = simulate(stationary(TimeTriggered((1.0,), (HALF,))))
    with pytest.raises(FunctionalError):
        cost_age_whole(time)
    with pytest.raises(FunctionalError):
        cost_time_whole(time, TimeTriggered((2.0,), (HALF,)))


def test_effect_weight_sign_check():
    traj = simulate(stationary(AgeTriggered(), horizon=1.0))
    negative = EffectWeight(lambda t, a: -1.0 + 0 * np.asarray(a))
    with pytest.raises(FunctionalError):
        effect(traj, negative)
    signed = EffectWeight(negative.phi, allow_signed=True)
    assert effect(traj, signed) == pytest.approx(-5.0, rel=1e-12)
