import csv

import numpy as np
import pytest
import yaml

from helpers import SCENARIOS
from renewal_sir.cli_io import (
    EXIT_INVALID,
    EXIT_OK,
    EXIT_SOLVER,
    ConfigError,
    build_scenario,
    load_config,
    make_curve,
    resolve,
    round_trip,
    run_cli,
)

SMALL = """
grid: {age_max: 6, cells_per_unit_age: 5, horizon: 2}
kernel: {form: separable, p: {exp: {amplitude: 0.2, rate: 0.1}}, q: 1}
rates: {d_S: 0.02, d_I: 0.05, d_R: 0.02, r_I: 0.5}
data:
  initial: {S: {table: {x: [0, 6], y: [5, 1]}}, I: {gauss: {amplitude: 0.3, center: 2, width: 1}}}
  boundary: {S: 1}
policy: {variant: age, ages: [1, 3], controls: [0.2, {breaks: [0, 1], values: [0.1, 0.5]}]}
"""


def write(tmp_path, text, name="s.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_simulate_writes_outputs(tmp_path):
    out = tmp_path / "out"
    assert run_cli(["--quiet", "simulate", str(write(tmp_path, SMALL)), "--out", str(out)]) == EXIT_OK
    traj = read_csv(out / "trajectory.csv")
    assert traj[0] == ["t", "a", "side", "S", "I", "R"]
    at_one = [r for r in traj[1:] if r[0] == "0" and float(r[1]) == 1.0]
    assert [r[2] for r in at_one] == ["-", "+"]
    # 11 times x (31 nodes + 2 interfaces listed twice)
    assert len(traj) - 1 == 11 * 33
    summary = read_csv(out / "summary.csv")
    assert summary[0] == ["t", "L1_S", "L1_I", "L1_R", "TV_S", "TV_I", "TV_R", "mass_total"]
    assert len(summary) == 12
    report = yaml.safe_load((out / "report.yaml").read_text())
    assert report["completed"] and report["cost_age_susceptible"] > 0
    assert not (out / "pre_jump.csv").exists()
    resolved = yaml.safe_load((out / "scenario.resolved.yaml").read_text())
    assert resolve(resolved) == resolved


def test_simulate_is_byte_identical(tmp_path):
    path = write(tmp_path, SMALL)
    for name in ("a", "b"):
        assert run_cli(["--quiet", "simulate", str(path), "--out", str(tmp_path / name)]) == EXIT_OK
    for f in ("trajectory.csv", "summary.csv", "report.yaml", "scenario.resolved.yaml"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_time_policy_writes_pre_jump(tmp_path):
    text = SMALL.replace("policy: {variant: age, ages: [1, 3]", "policy: {variant: time, times: [0.4, 1]")
    out = tmp_path / "out"
    assert run_cli(["--quiet", "simulate", str(write(tmp_path, text)), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "pre_jump.csv")
    assert {r[0] for r in rows[1:]} == {"0.40000000000000002", "1"}
    assert "cost_time_whole" in yaml.safe_load((out / "report.yaml").read_text())


def test_unknown_key_names_path_and_line(tmp_path):
    path = write(tmp_path, SMALL + "solver:\n  fp_tol: 1e-9\n  tolerance: 3\n")
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert err.value.key == "solver.tolerance" and err.value.line == 11
    out = tmp_path / "out"
    assert run_cli(["--quiet", "simulate", str(path), "--out", str(out)]) == EXIT_INVALID
    assert not out.exists()


@pytest.mark.parametrize(
    "snippet",
    [
        "grid: {age_max: 6, cells_per_unit_age: 5, horizon: 2.05}",
        "kernel: {form: gaussian}",
        "policy: {variant: age, ages: [1], controls: [0.2, 0.3]}",
        "policy: {variant: age, ages: [1], controls: [1.5]}",
        "rates: {d_S: -0.1}",
    ],
)
def test_invalid_scenarios_exit_one(tmp_path, snippet):
    head = snippet.split(":")[0]
    lines = [ln for ln in SMALL.strip().splitlines() if not ln.startswith(head) and not ln.startswith("  ")]
    text = "\n".join(lines) + "\n" + snippet + "\n"
    if head != "data":
        text += "data:\n  initial: {S: 1}\n"
    out = tmp_path / "out"
    assert run_cli(["--quiet", "simulate", str(write(tmp_path, text)), "--out", str(out)]) == EXIT_INVALID
    assert not out.exists()


def test_blowup_exits_two(tmp_path):
    text = """
grid: {age_max: 4, cells_per_unit_age: 10, horizon: 1}
rates: {d_S: -25, allow_signed: true}
data: {initial: {S: 1}}
"""
    out = tmp_path / "out"
    assert run_cli(["--quiet", "simulate", str(write(tmp_path, text)), "--out", str(out)]) == EXIT_SOLVER
    assert "blowup" in yaml.safe_load((out / "report.yaml").read_text())


def test_check_and_validate(tmp_path, capsys):
    assert run_cli(["check", str(write(tmp_path, SMALL))]) == EXIT_OK
    text = capsys.readouterr().out
    assert "NEG-eligible: True" in text and "valid" in text
    bad = SMALL.replace("kernel: {", "kernel: {Lambda_inf: 0.01, ")
    assert run_cli(["check", str(write(tmp_path, bad, "bad.yaml"))]) == EXIT_INVALID
    assert "VIOLATION  Lambda_inf" in capsys.readouterr().out


def test_optimize_outputs_and_determinism(tmp_path):
    text = SMALL + "optimize: {direction: min_cost, cap: 1000, bins: 1, budget: 12}\n"
    text = text.replace("ages: [1, 3], controls: [0.2, {breaks: [0, 1], values: [0.1, 0.5]}]", "ages: [1], controls: [0]")
    path = write(tmp_path, text)
    for name in ("a", "b"):
        assert run_cli(["--quiet", "optimize", str(path), "--out", str(tmp_path / name), "--seed", "4"]) == EXIT_OK
    for f in ("best_control.csv", "history.csv", "optimize.yaml"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    summary = yaml.safe_load((tmp_path / "a" / "optimize.yaml").read_text())
    # a cap above the uncontrolled effect makes the zero control optimal
    assert summary["feasible"] and summary["cost"] == 0.0


def test_optimize_needs_cap(tmp_path):
    assert run_cli(["--quiet", "optimize", str(write(tmp_path, SMALL)), "--out", str(tmp_path / "o")]) == EXIT_INVALID


def test_curve_forms():
    x = np.array([0.0, 1.0, 3.0])
    assert make_curve(2.5)(x).tolist() == [2.5] * 3
    assert make_curve({"table": {"x": [0, 2], "y": [0, 4]}})(x).tolist() == [0.0, 2.0, 4.0]
    assert make_curve({"exp": {"amplitude": 2, "rate": 1, "shift": 1}})(x)[1] == 2.0
    assert make_curve({"gauss": {"amplitude": 3, "center": 1, "width": 2}})(x)[1] == 3.0


def test_tabulated_kernel_and_product_rates():
    raw = yaml.safe_load(SMALL)
    raw["kernel"] = {"form": "tabulated", "ages": [0, 6], "values": [[0.1, 0.0], [0.2, 0.1]]}
    raw["rates"]["d_I"] = {"product": {"time": {"table": {"x": [0, 2], "y": [1, 2]}}, "age": 0.05}}
    resolved = resolve(raw)
    sc = build_scenario(resolved)
    lam = sc.kernel.evaluate(np.array([0.0, 3.0, 6.0]), np.array([0.0, 6.0]))
    assert np.allclose(lam, [[0.1, 0.0], [0.15, 0.05], [0.2, 0.1]])
    assert sc.rates.d_I(np.array([1.0]), np.array([4.0]))[0] == pytest.approx(0.075)
    assert round_trip(resolved) == resolved


def test_shipped_scenarios_resolve():
    for path in SCENARIOS.glob("*.yaml"):
        resolved = load_config(path)
        assert round_trip(resolved) == resolved
        build_scenario(resolved)


def test_exponent_without_dot_is_a_number(tmp_path):
    resolved = load_config(write(tmp_path, SMALL + "solver: {fp_tol: 1e-9}\n"))
    assert resolved["solver"]["fp_tol"] == 1e-9
