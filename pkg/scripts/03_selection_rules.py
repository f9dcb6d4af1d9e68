"""The power function at the selected point, for greedy and random selection.

P-greedy always picks the point where the power function is largest, so its
nu_n equals sigma_n.  Other rules pick points where the power is smaller, yet
the product bound says their window means of nu_n decay at least as fast.
"""

from gkl import GAUSSIAN_W2, SelectionRule, StopCriteria, run_greedy, sample_random
from gkl.analysis import geometric_mean_window

candidates = sample_random(seed=0, count=3000, dim=3)
stop = StopCriteria(max_points=121)
for rule in (SelectionRule.Beta(0), SelectionRule.Random(1), SelectionRule.Random(2)):
    trace = run_greedy(GAUSSIAN_W2, candidates, None, rule, stop)
    nu_mean = geometric_mean_window(trace.nu, 60)
    sigma_mean = geometric_mean_window(trace.sigma, 60)
    print(f"{rule.label:>15}: window mean at n=60  nu {nu_mean:.3e}   sigma {sigma_mean:.3e}")
