"""How the choice of beta changes the convergence rate.

The piecewise linear Wendland kernel interpolates f(x) = x^0.51, which has a
singular derivative at 0.  P-greedy spreads points evenly and converges
slowly; target-aware rules crowd points near 0 and converge much faster.
"""

import sys

import numpy as np

from gkl import SelectionRule, StopCriteria, WENDLAND_K0, run_greedy, uniform_grid
from gkl.analysis import fit_loglog_slope
from gkl.plotting import emit_plot

grid = uniform_grid(2000)
f = grid.points[:, 0] ** 0.51
rules = [SelectionRule.Beta(b) for b in (0, 0.5, 1, 2)] + [SelectionRule.FOverP()]

series = []
for rule in rules:
    trace = run_greedy(WENDLAND_K0, grid, f, rule, StopCriteria(max_points=200))
    fit = fit_loglog_slope(trace.n[1:], trace.max_residual[1:], (20, 200))
    print(f"{rule.label:>9}: error after 200 points {trace.max_residual[-1]:.2e}, "
          f"slope {fit.slope:+.2f}")
    series.append((rule.label, trace.n[1:], trace.max_residual[1:]))

out = sys.argv[1] if len(sys.argv) > 1 else "beta_scale.svg"
emit_plot(series, [("n^-1/2", -0.5), ("n^-2", -2.0)], out, ylabel="max |f - s_n|")
print(f"plot written to {out}")
