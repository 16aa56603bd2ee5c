"""Pattern search against a 21 x 21 grid search on the two-parameter toy."""
import time
from pathlib import Path

from renewal_sir.cli_io import parse_scenario
from renewal_sir.optimizer import OptimizationProblem, grid_search, solve

ROOT = Path(__file__).resolve().parents[1]

run = parse_scenario(ROOT / "scenarios" / "optimizer_toy.yaml")
opt = run.resolved["optimize"]
problem = OptimizationProblem(run.scenario, opt["direction"], opt["cap"], opt["cost"], opt["bins"], solver=run.solver)

t0 = time.perf_counter()
res = solve(problem, budget=opt["budget"], seed=opt["seed"])
t1 = time.perf_counter()
print(f"pattern search: objective {res.objective:.6f} at {res.control.values.ravel().round(4).tolist()} "
      f"({res.evaluations} evaluations, {t1 - t0:.1f} s, feasible={res.feasible})")
best, value = grid_search(problem, points_per_axis=21)
print(f"grid search:    objective {value:.6f} at {best.values.ravel().tolist()} ({time.perf_counter() - t1:.1f} s)")
