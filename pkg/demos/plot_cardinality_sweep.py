"""
How much smaller are indirect sets?
===================================

Monte Carlo sweep of mean set size for a low-entropy theta (mass on the first
quarter of the categories) and a prior proportional to theta. Runs with 500
replications per cell to stay quick; pass more for smoother numbers.
"""

import sys

from predsets.sim import SimConfig, run_cardinality_experiment

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 500

print(f"{'alpha':>6} {'K':>4} {'N':>5} {'direct':>8} {'indirect':>9} {'oracle':>8} {'ratio':>6}")
for alpha in (0.05, 0.1):
    for K in (50, 100, 150):
        for N in (10, 30, 100, 300):
            res = run_cardinality_experiment(SimConfig(K=K, N=N, alpha=alpha, replications=reps))
            m = res.mean_cardinality
            print(
                f"{alpha:>6} {K:>4} {N:>5} {m['direct']:>8.2f} {m['indirect']:>9.2f} "
                f"{m['oracle-order']:>8.2f} {res.ratio_indirect_direct:>6.3f}"
            )

###############################################################################
# With N=10 and alpha=0.05 every p-value is at least 1/11, so every method
# returns all K categories. The gain appears once 1/(N+1) drops below alpha.
