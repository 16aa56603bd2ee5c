"""Self-excited renewal problem u_t + u_x = (int u) u that blows up at t = ln 2.

Prints the computed L1 norm next to e^t / (2 - e^t) and where the solver
stops.
"""
import logging
import math

from renewal_sir.core import Grid
from renewal_sir.coupled_ibvp import solve_global
from renewal_sir.oracles import blowup_case

logging.basicConfig(level=logging.ERROR)
case = blowup_case()
for cells in (100, 200, 400, 800):
    grid = Grid(20.0, cells, 0.75)
    spec, u0 = case.system(grid)
    sol = solve_global(spec, u0, 0.75)
    u = sol.components[0]
    n = grid.time_index(0.6)
    stop = f"blow-up flagged at t = {sol.blowup.time:.4f}" if sol.blowup else "no blow-up flagged"
    print(f"dt = 1/{cells:<4d} L1(0.6) = {u.l1()[n]:.6f} (exact {case.l1_norm(0.6):.6f}); {stop}")
print(f"true blow-up time ln 2 = {math.log(2):.4f}")
