"""
Prediction sets from a single count vector
==========================================

A category enters the set when its p-value exceeds alpha. The direct set
only uses the observed counts; an indirect set also borrows an ordering
from prior pseudo-counts.
"""

import numpy as np

from predsets import direct_set, indirect_set, oracle_set, set_pvalues

x = np.array([14, 9, 4, 2, 1, 0, 0, 0])
alpha = 0.1

# p-values of the direct set; the +1 for the candidate lets counts one apart tie
print("counts   ", x)
print("direct p ", np.round(set_pvalues(x), 3))

A = direct_set(x, alpha)
print("direct set", A.sorted(), "size", A.cardinality)

###############################################################################
# Prior pseudo-counts break the tie among the three unseen categories.
# Here a neighbor suggests category 5 is common, 6 and 7 are not.

gamma = np.array([6.0, 4.0, 2.0, 1.0, 0.5, 3.0, 0.01, 0.01])
B = indirect_set(x, gamma, alpha)
print("indirect p", np.round(B.pvalues, 3))
print("indirect set", B.sorted(), "size", B.cardinality)

###############################################################################
# A uniform prior carries no ordering information and gives back the
# direct set exactly.

for c in (0.0, 1.0, 25.0):
    assert indirect_set(x, np.full(x.size, c), alpha).included == A.included
print("uniform priors reproduce the direct set")

###############################################################################
# With the true probabilities known, ordering by theta is the best one can do.

theta = np.array([0.4, 0.25, 0.15, 0.1, 0.05, 0.03, 0.01, 0.01])
print("oracle set", oracle_set(theta, alpha).sorted())
