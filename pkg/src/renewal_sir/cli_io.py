"""Scenario files, result files and the ``renewal-sir`` command line.

A scenario is a YAML document with the sections below; every key not given
takes the default shown.  Unknown keys are rejected.

    grid:     age_max 20, cells_per_unit_age 10, horizon 5
    kernel:   form constant|separable|tabulated (constant), value 0,
              p, q (separable curves), ages + values (tabulated matrix),
              Lambda_inf, Lambda_L (null = use sampled values)
    rates:    d_S, d_I, d_R, r_I (curve in age or {product: {time, age}}, 0),
              R_L, R_1, R_inf (null), allow_signed false
    data:     initial {S, I, R} curves in age; boundary {S, I, R} curves in t (0)
    policy:   variant age|time (age), ages or times ([]), controls ([])
    solver:   fp_tol 1e-10, max_iter 100, max_window 0.5, blowup_factor 1e8
    output:   every 1 (time stride of the trajectory file)
    optimize: direction min_cost, cap null, cost age_susceptible, bins 2,
              budget 500, seed 0

A curve is a number, ``{table: {x: [...], y: [...]}}`` (linear, constant
beyond the ends), ``{exp: {amplitude, rate, shift}}`` or
``{gauss: {amplitude, center, width}}``.  A control is a number or
``{breaks: [...], values: [...]}`` (a right-continuous step function).
"""
from __future__ import annotations

import argparse
import copy
import csv
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from .core import Grid
from .coupled_ibvp import BlowupError, ComponentSolveError, WindowCollapseError
from .functionals import COSTS, FunctionalError, effect
from .sir_model import (
    AgeTriggered,
    Kernel,
    Rates,
    Scenario,
    ScenarioError,
    TimeTriggered,
    Trajectory,
    piecewise_constant,
    simulate,
    trajectory_distance,
    validate_scenario,
)

log = logging.getLogger("renewal_sir")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2
RESOLVED_NAME = "scenario.resolved.yaml"

DEFAULTS: dict[str, dict[str, Any]] = {
    "grid": {"age_max": 20.0, "cells_per_unit_age": 10, "horizon": 5.0},
    "kernel": {"form": "constant", "value": 0.0, "p": None, "q": None, "ages": None, "values": None,
               "Lambda_inf": None, "Lambda_L": None},
    "rates": {"d_S": 0.0, "d_I": 0.0, "d_R": 0.0, "r_I": 0.0, "R_L": None, "R_1": None, "R_inf": None,
              "allow_signed": False},
    "data": {"initial": {"S": 0.0, "I": 0.0, "R": 0.0}, "boundary": {"S": 0.0, "I": 0.0, "R": 0.0}},
    "policy": {"variant": "age", "ages": [], "times": [], "controls": []},
    "solver": {"fp_tol": 1e-10, "max_iter": 100, "max_window": 0.5, "blowup_factor": 1e8},
    "output": {"every": 1},
    "optimize": {"direction": "min_cost", "cap": None, "cost": "age_susceptible", "bins": 2, "budget": 500, "seed": 0},
}
CURVE_KEYS = {"table": ("x", "y"), "exp": ("amplitude", "rate", "shift"), "gauss": ("amplitude", "center", "width")}


class ConfigError(ValueError):
    def __init__(self, message: str, key: str = "", line: int | None = None):
        self.key, self.line = key, line
        where = f" (key {key}" + (f", line {line})" if line else ")") if key else ""
        super().__init__(message + where)


# ---------------------------------------------------------------- parsing


def _line_map(text: str) -> dict[tuple, int]:
    """Line number (1-based) of every mapping key, by key path."""
    lines: dict[tuple, int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (k.value,)
                lines[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    root = yaml.compose(text)
    if root is not None:
        walk(root, ())
    return lines


class _Resolver:
    def __init__(self, lines: dict[tuple, int]):
        self.lines = lines

    def fail(self, message: str, path: tuple):
        raise ConfigError(message, ".".join(str(p) for p in path), self.lines.get(path))

    def mapping(self, value, path: tuple, allowed) -> dict:
        if value is None:
            value = {}
        if not isinstance(value, dict):
            self.fail("expected a mapping", path)
        for k in value:
            if k not in allowed:
                self.fail(f"unknown key {k!r}", path + (k,))
        return value

    def number(self, value, path: tuple, integer: bool = False, optional: bool = False):
        if value is None and optional:
            return None
        if isinstance(value, str):
            # YAML 1.1 reads 1e-9 (no dot) as a string
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"expected a number, got {value!r}", path)
        if integer:
            if float(value) != int(value):
                self.fail("expected an integer", path)
            return int(value)
        return float(value)

    def numbers(self, value, path: tuple) -> list[float]:
        if not isinstance(value, list):
            self.fail("expected a list of numbers", path)
        return [self.number(v, path + (i,)) for i, v in enumerate(value)]

    def curve(self, value, path: tuple):
        if not isinstance(value, dict):
            return self.number(value, path)
        self.mapping(value, path, CURVE_KEYS)
        if len(value) != 1:
            self.fail("a curve has exactly one form", path)
        (form, body), = value.items()
        keys = CURVE_KEYS[form]
        body = self.mapping(body, path + (form,), keys)
        if form == "table":
            out = {k: self.numbers(body.get(k), path + (form, k)) for k in keys}
            if len(out["x"]) != len(out["y"]) or len(out["x"]) < 1 or np.any(np.diff(out["x"]) <= 0):
                self.fail("table needs increasing x and one y per x", path + (form,))
        else:
            defaults = {"shift": 0.0}
            out = {}
            for k in keys:
                if k not in body and k not in defaults:
                    self.fail(f"missing {k!r}", path + (form,))
                out[k] = self.number(body.get(k, defaults.get(k)), path + (form, k))
        return {form: out}

    def rate(self, value, path: tuple):
        if isinstance(value, dict) and "product" in value:
            self.mapping(value, path, ("product",))
            body = self.mapping(value["product"], path + ("product",), ("time", "age"))
            return {"product": {k: self.curve(body.get(k, 1.0), path + ("product", k)) for k in ("time", "age")}}
        return self.curve(value, path)

    def control(self, value, path: tuple):
        if not isinstance(value, dict):
            return self.number(value, path)
        body = self.mapping(value, path, ("breaks", "values"))
        out = {k: self.numbers(body.get(k), path + (k,)) for k in ("breaks", "values")}
        if len(out["breaks"]) != len(out["values"]) or np.any(np.diff(out["breaks"]) <= 0):
            self.fail("controls need increasing breaks and one value per break", path)
        return out


def resolve(raw: dict | None, lines: dict[tuple, int] | None = None) -> dict:
    """Check a loaded document and fill in every default."""
    r = _Resolver(lines or {})
    raw = r.mapping(raw, (), DEFAULTS)
    out: dict[str, Any] = {}

    g = r.mapping(raw.get("grid"), ("grid",), DEFAULTS["grid"])
    out["grid"] = {
        "age_max": r.number(g.get("age_max", DEFAULTS["grid"]["age_max"]), ("grid", "age_max")),
        "cells_per_unit_age": r.number(g.get("cells_per_unit_age", 10), ("grid", "cells_per_unit_age"), integer=True),
        "horizon": r.number(g.get("horizon", DEFAULTS["grid"]["horizon"]), ("grid", "horizon")),
    }

    k = r.mapping(raw.get("kernel"), ("kernel",), DEFAULTS["kernel"])
    form = k.get("form", "constant")
    if form not in ("constant", "separable", "tabulated"):
        r.fail(f"unknown kernel form {form!r}", ("kernel", "form"))
    kern: dict[str, Any] = dict(DEFAULTS["kernel"], form=form)
    if form == "constant":
        kern["value"] = r.number(k.get("value", 0.0), ("kernel", "value"))
    elif form == "separable":
        for key in ("p", "q"):
            kern[key] = r.curve(k.get(key, 1.0), ("kernel", key))
    else:
        kern["ages"] = r.numbers(k.get("ages"), ("kernel", "ages"))
        rows = k.get("values")
        if not isinstance(rows, list) or len(rows) != len(kern["ages"]):
            r.fail("tabulated kernel needs one row per age", ("kernel", "values"))
        kern["values"] = [r.numbers(row, ("kernel", "values", i)) for i, row in enumerate(rows)]
        if any(len(row) != len(kern["ages"]) for row in kern["values"]):
            r.fail("tabulated kernel must be square", ("kernel", "values"))
    for key in ("Lambda_inf", "Lambda_L"):
        kern[key] = r.number(k.get(key), ("kernel", key), optional=True)
    out["kernel"] = kern

    rt = r.mapping(raw.get("rates"), ("rates",), DEFAULTS["rates"])
    rates: dict[str, Any] = {}
    for key in ("d_S", "d_I", "d_R", "r_I"):
        rates[key] = r.rate(rt.get(key, 0.0), ("rates", key))
    for key in ("R_L", "R_1", "R_inf"):
        rates[key] = r.number(rt.get(key), ("rates", key), optional=True)
    signed = rt.get("allow_signed", False)
    if not isinstance(signed, bool):
        r.fail("expected true or false", ("rates", "allow_signed"))
    rates["allow_signed"] = signed
    out["rates"] = rates

    d = r.mapping(raw.get("data"), ("data",), DEFAULTS["data"])
    data = {}
    for part in ("initial", "boundary"):
        sec = r.mapping(d.get(part), ("data", part), ("S", "I", "R"))
        data[part] = {c: r.curve(sec.get(c, 0.0), ("data", part, c)) for c in ("S", "I", "R")}
    out["data"] = data

    p = r.mapping(raw.get("policy"), ("policy",), DEFAULTS["policy"])
    variant = p.get("variant", "age")
    if variant not in ("age", "time"):
        r.fail(f"unknown policy variant {variant!r}", ("policy", "variant"))
    where = "ages" if variant == "age" else "times"
    other = "times" if variant == "age" else "ages"
    if p.get(other):
        r.fail(f"{other} given for a {variant}-triggered policy", ("policy", other))
    positions = r.numbers(p.get(where, []), ("policy", where))
    controls = p.get("controls", [])
    if not isinstance(controls, list) or len(controls) != len(positions):
        r.fail(f"need one control per entry of {where}", ("policy", "controls"))
    out["policy"] = {
        "variant": variant,
        "ages": positions if variant == "age" else [],
        "times": positions if variant == "time" else [],
        "controls": [r.control(c, ("policy", "controls", i)) for i, c in enumerate(controls)],
    }

    s = r.mapping(raw.get("solver"), ("solver",), DEFAULTS["solver"])
    out["solver"] = {
        "fp_tol": r.number(s.get("fp_tol", 1e-10), ("solver", "fp_tol")),
        "max_iter": r.number(s.get("max_iter", 100), ("solver", "max_iter"), integer=True),
        "max_window": r.number(s.get("max_window", 0.5), ("solver", "max_window")),
        "blowup_factor": r.number(s.get("blowup_factor", 1e8), ("solver", "blowup_factor")),
    }

    o = r.mapping(raw.get("output"), ("output",), DEFAULTS["output"])
    out["output"] = {"every": r.number(o.get("every", 1), ("output", "every"), integer=True)}
    if out["output"]["every"] < 1:
        r.fail("must be at least 1", ("output", "every"))

    opt = r.mapping(raw.get("optimize"), ("optimize",), DEFAULTS["optimize"])
    od = DEFAULTS["optimize"]
    direction = opt.get("direction", od["direction"])
    if direction not in ("min_cost", "min_effect"):
        r.fail(f"unknown direction {direction!r}", ("optimize", "direction"))
    cost = opt.get("cost", od["cost"])
    if cost not in COSTS:
        r.fail(f"unknown cost {cost!r}", ("optimize", "cost"))
    out["optimize"] = {
        "direction": direction,
        "cap": r.number(opt.get("cap"), ("optimize", "cap"), optional=True),
        "cost": cost,
        "bins": r.number(opt.get("bins", od["bins"]), ("optimize", "bins"), integer=True),
        "budget": r.number(opt.get("budget", od["budget"]), ("optimize", "budget"), integer=True),
        "seed": r.number(opt.get("seed", od["seed"]), ("optimize", "seed"), integer=True),
    }
    return out


# ---------------------------------------------------------------- building


def make_curve(spec) -> Callable[[np.ndarray], np.ndarray]:
    if not isinstance(spec, dict):
        c = float(spec)
        return lambda x: c + 0.0 * np.asarray(x, dtype=float)
    (form, p), = spec.items()
    if form == "table":
        xs, ys = np.asarray(p["x"]), np.asarray(p["y"])
        return lambda x: np.interp(np.asarray(x, dtype=float), xs, ys)
    if form == "exp":
        return lambda x: p["amplitude"] * np.exp(-p["rate"] * (np.asarray(x, dtype=float) - p["shift"]))
    return lambda x: p["amplitude"] * np.exp(-(((np.asarray(x, dtype=float) - p["center"]) / p["width"]) ** 2))


def make_rate(spec):
    if isinstance(spec, dict) and "product" in spec:
        ft, fa = make_curve(spec["product"]["time"]), make_curve(spec["product"]["age"])
        return lambda t, a: ft(t) * fa(a)
    fa = make_curve(spec)
    return lambda t, a: fa(a) + 0.0 * np.asarray(t, dtype=float)


def make_control(spec):
    if isinstance(spec, dict):
        return piecewise_constant(spec["breaks"], spec["values"])
    c = float(spec)
    return lambda x: c + 0.0 * np.asarray(x, dtype=float)


def _tabulated(ages, values):
    """Bilinear interpolation of a kernel table, constant beyond the table."""
    ages, table = np.asarray(ages, float), np.asarray(values, float)

    def locate(x):
        x = np.clip(x, ages[0], ages[-1])
        i = np.clip(np.searchsorted(ages, x, side="right") - 1, 0, max(ages.size - 2, 0))
        if ages.size == 1:
            return i, np.zeros_like(x)
        return i, (x - ages[i]) / (ages[i + 1] - ages[i])

    def lam(a, ap):
        a, ap = np.broadcast_arrays(np.asarray(a, float), np.asarray(ap, float))
        i, s = locate(a)
        j, r = locate(ap)
        if ages.size == 1:
            return table[0, 0] + 0.0 * a
        return ((1 - s) * (1 - r) * table[i, j] + s * (1 - r) * table[i + 1, j]
                + (1 - s) * r * table[i, j + 1] + s * r * table[i + 1, j + 1])

    return lam


def build_scenario(config: dict, cells: int | None = None) -> Scenario:
    """Scenario of a resolved config, optionally at another resolution."""
    g = config["grid"]
    grid = Grid(g["age_max"], cells or g["cells_per_unit_age"], g["horizon"])
    k = config["kernel"]
    declared = {key: (math.inf if k[key] is None else k[key]) for key in ("Lambda_inf", "Lambda_L")}
    if k["form"] == "constant":
        kernel = Kernel.constant(k["value"], **declared)
    elif k["form"] == "separable":
        kernel = Kernel.separable(make_curve(k["p"]), make_curve(k["q"]), **declared)
    else:
        kernel = Kernel(_tabulated(k["ages"], k["values"]), **declared)
    rt = config["rates"]
    rates = Rates(
        *(make_rate(rt[key]) for key in ("d_S", "d_I", "d_R", "r_I")),
        **{key: (math.inf if rt[key] is None else rt[key]) for key in ("R_L", "R_1", "R_inf")},
    )
    p = config["policy"]
    controls = tuple(make_control(c) for c in p["controls"])
    if p["variant"] == "age":
        policy = AgeTriggered(tuple(p["ages"]), controls)
    else:
        policy = TimeTriggered(tuple(p["times"]), controls)
    d = config["data"]
    initial = tuple(grid.sample(make_curve(d["initial"][c])) for c in ("S", "I", "R"))
    boundary = tuple(make_curve(d["boundary"][c]) for c in ("S", "I", "R"))
    return Scenario(grid, kernel, rates, policy, initial, boundary, rt["allow_signed"])


@dataclass
class RunConfig:
    resolved: dict
    scenario: Scenario

    @property
    def solver(self) -> dict:
        return dict(self.resolved["solver"])


def load_config(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
        lines = _line_map(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"YAML error: {exc.problem}", "", line) from exc
    return resolve(raw, lines)


def parse_scenario(path: str | Path) -> RunConfig:
    """Read, resolve and build a scenario file.  Raises ConfigError."""
    resolved = load_config(path)
    try:
        scenario = build_scenario(resolved)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(resolved, scenario)


def dump_resolved(resolved: dict) -> str:
    return yaml.safe_dump(resolved, sort_keys=True, default_flow_style=None)


# ---------------------------------------------------------------- writing


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_trajectory(traj: Trajectory, path: Path, every: int = 1):
    interfaces = set(traj.grid.interface_nodes)
    ages = traj.grid.ages
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "a", "side", "S", "I", "R"])
        for n in range(0, traj.times.size, every):
            t = _fmt(traj.times[n])
            S, I, R = (h.right[n] for h in traj.compartments())
            Sl, Il, Rl = (h.left[n] for h in traj.compartments())
            for k, a in enumerate(ages):
                if k in interfaces:
                    w.writerow([t, _fmt(a), "-", _fmt(Sl[k]), _fmt(Il[k]), _fmt(Rl[k])])
                    w.writerow([t, _fmt(a), "+", _fmt(S[k]), _fmt(I[k]), _fmt(R[k])])
                else:
                    w.writerow([t, _fmt(a), "", _fmt(S[k]), _fmt(I[k]), _fmt(R[k])])


def write_summary(traj: Trajectory, path: Path):
    S, I, R = traj.compartments()
    cols = [traj.times, S.l1(), I.l1(), R.l1(), S.tv(), I.tv(), R.tv(), traj.mass()]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "L1_S", "L1_I", "L1_R", "TV_S", "TV_I", "TV_R", "mass_total"])
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])


def write_pre_jump(traj: Trajectory, path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "a", "side", "S", "I", "R"])
        for t, state in sorted(traj.pre_jump.items()):
            for k, a in enumerate(traj.grid.ages):
                w.writerow([_fmt(t), _fmt(a), "", *(_fmt(u.right[k]) for u in state)])


def functional_values(traj: Trajectory) -> dict[str, float]:
    out = {"effect": effect(traj)}
    age = isinstance(traj.policy, AgeTriggered)
    for name, fn in COSTS.items():
        if name.startswith("age") == age:
            try:
                out[f"cost_{name}"] = fn(traj)
            except FunctionalError:
                pass
    return out


def run_report(traj: Trajectory) -> dict:
    report = {
        "completed": traj.completed,
        "final_time": float(traj.times[-1]),
        "windows": len(traj.reports),
        "picard_iterations": traj.total_iterations,
        "max_contraction_ratio": max((r.max_ratio for r in traj.reports), default=0.0),
        "min_value": min(h.minimum() for h in traj.compartments()),
    }
    if traj.blowup is not None:
        report["blowup"] = {"time": traj.blowup.time, "reason": traj.blowup.reason}
    if traj.completed:
        report.update({k: float(v) for k, v in functional_values(traj).items()})
    return report


# ---------------------------------------------------------------- commands


def _prepare(args) -> RunConfig:
    run = parse_scenario(args.scenario)
    if args.tol is not None:
        run.resolved["solver"]["fp_tol"] = args.tol
    if getattr(args, "seed", None) is not None:
        run.resolved["optimize"]["seed"] = args.seed
    report = validate_scenario(run.scenario)
    for msg in report.warnings:
        log.warning(msg)
    if not report.ok:
        raise ScenarioError("invalid scenario:\n" + "\n".join(str(v) for v in report.violations))
    if not report.neg_eligible and not run.scenario.allow_signed_rates:
        raise ScenarioError("signed rates need rates.allow_signed: true")
    return run


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    run = _prepare(args)
    traj = simulate(run.scenario, **run.solver)
    out = _out_dir(args)
    (out / RESOLVED_NAME).write_text(dump_resolved(run.resolved))
    write_trajectory(traj, out / "trajectory.csv", run.resolved["output"]["every"])
    write_summary(traj, out / "summary.csv")
    if traj.pre_jump:
        write_pre_jump(traj, out / "pre_jump.csv")
    report = run_report(traj)
    (out / "report.yaml").write_text(yaml.safe_dump(report, sort_keys=True))
    log.info("wrote %s (%d times, %d Picard iterations)", out, traj.times.size, traj.total_iterations)
    if not traj.completed:
        log.error("blow-up at t = %.6g", traj.blowup.time)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_optimize(args) -> int:
    from .optimizer import OptimizationProblem, solve

    run = _prepare(args)
    opt = run.resolved["optimize"]
    if opt["cap"] is None:
        raise ConfigError("optimize needs a cap", "optimize.cap")
    problem = OptimizationProblem(run.scenario, opt["direction"], opt["cap"], opt["cost"], opt["bins"], solver=run.solver)
    result = solve(problem, opt["budget"], opt["seed"])
    out = _out_dir(args)
    (out / RESOLVED_NAME).write_text(dump_resolved(run.resolved))
    edges = problem.bin_edges()
    with open(out / "best_control.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["campaign", "position", "bin_start", "bin_end", "value"])
        for j, pos in enumerate(problem.positions):
            for b in range(problem.bins):
                w.writerow([j + 1, _fmt(pos), _fmt(edges[b]), _fmt(edges[b + 1]), _fmt(result.control.values[j, b])])
    with open(out / "history.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        d = problem.dimension
        w.writerow(["index", *(f"x{i}" for i in range(d)), "cost", "effect", "primary", "violation",
                    "feasible", "rho", "best_feasible", "error"])
        for h in result.history:
            w.writerow([h.index, *(_fmt(v) for v in h.control), _fmt(h.cost), _fmt(h.effect), _fmt(h.primary),
                        _fmt(h.violation), int(h.feasible), _fmt(h.rho), _fmt(h.best_feasible), h.error or ""])
    summary = {"cost": result.cost, "effect": result.effect, "objective": result.objective,
               "feasible": result.feasible, "evaluations": result.evaluations, "rho": result.rho}
    (out / "optimize.yaml").write_text(yaml.safe_dump({k: (v if isinstance(v, bool) else float(v)) for k, v in summary.items()}))
    log.info("best objective %.10g (%s) after %d evaluations", result.objective,
             "feasible" if result.feasible else "infeasible", result.evaluations)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .oracles import oracle_suite

    results = oracle_suite()
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  error {r.error:.3e}  tol {r.tolerance:.1e}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVALID


def convergence_table(resolved: dict, levels: int = 3, reference_factor: int = 4, solver: dict | None = None) -> list[dict]:
    """L1 errors of a refinement ladder against one finer reference run.

    Levels use cells c, 2c, 4c, ... from the config; the reference has
    ``reference_factor`` times the finest level's cells.  The error is the
    sup over the coarse time nodes of the summed S, I, R L1 distances, with
    the reference restricted to the coarse nodes.
    """
    solver = solver or resolved["solver"]
    base = resolved["grid"]["cells_per_unit_age"]
    cells = [base * 2**i for i in range(levels)]
    ref = simulate(build_scenario(resolved, cells[-1] * reference_factor), **solver)
    rows = []
    for c in cells:
        traj = simulate(build_scenario(resolved, c), **solver)
        rows.append({"cells_per_unit_age": c, "error": trajectory_distance(traj, ref)})
    for prev, row in zip(rows, rows[1:]):
        row["ratio"] = prev["error"] / row["error"] if row["error"] > 0 else math.inf
        row["order"] = math.log2(row["ratio"]) if row["ratio"] > 0 else math.nan
    return rows


def cmd_convergence(args) -> int:
    run = _prepare(args)
    rows = convergence_table(run.resolved, solver=run.solver)
    out = _out_dir(args)
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cells_per_unit_age", "error", "ratio", "order"])
        for r in rows:
            w.writerow([r["cells_per_unit_age"], _fmt(r["error"]), _fmt(r.get("ratio", math.nan)), _fmt(r.get("order", math.nan))])
    for r in rows:
        extra = f"  ratio {r['ratio']:.3f}  order {r['order']:.2f}" if "ratio" in r else ""
        print(f"cells {r['cells_per_unit_age']:>5}  L1 error {r['error']:.3e}{extra}")
    return EXIT_OK


def cmd_check(args) -> int:
    run = parse_scenario(args.scenario)
    report = validate_scenario(run.scenario)
    for v in report.violations:
        print(f"VIOLATION  {v}")
    for msg in report.warnings:
        print(f"WARNING    {msg}")
    print(f"NEG-eligible: {report.neg_eligible}")
    for key, val in sorted(report.sampled.items()):
        print(f"sampled {key} = {val:.6g}")
    print("valid" if report.ok else "invalid")
    return EXIT_OK if report.ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="renewal-sir", description=__doc__.split("\n")[0])
    parser.add_argument("--quiet", action="store_true", help="only report warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, scenario=True, help=""):
        p = sub.add_parser(name, help=help)
        if scenario:
            p.add_argument("scenario", help="scenario YAML file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--tol", type=float, default=None, help="fixed-point tolerance")
        p.add_argument("--seed", type=int, default=None, help="optimizer seed")
        p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
        p.set_defaults(func=fn)

    add("simulate", cmd_simulate, help="solve a scenario and write CSV files")
    add("optimize", cmd_optimize, help="search the best vaccination controls")
    add("validate", cmd_validate, scenario=False, help="run the closed-form oracle suite")
    add("convergence", cmd_convergence, help="refinement ladder with observed orders")
    add("check", cmd_check, help="validate the scenario hypotheses only")
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, FunctionalError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except (ComponentSolveError, BlowupError, WindowCollapseError, FloatingPointError) as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER


def main() -> None:
    sys.exit(run_cli())


def round_trip(resolved: dict) -> dict:
    """Resolve the YAML dump of a resolved config again."""
    return resolve(yaml.safe_load(dump_resolved(copy.deepcopy(resolved))))
