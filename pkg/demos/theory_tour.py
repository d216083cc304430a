"""
How many communities can a low-dimensional factorization hold?
===============================================================

Three experiments on small dense matrices:

1. A Gram matrix V^T V with absolute row sums at most one has at most
   d / (2 eps^2) community pairs, no matter how large n is.
2. The softmax of V^T V escapes that limit: n/b blocks of b vertices fit
   into dimension O(log n).
3. That escape is fragile: jittering vector lengths by a factor e^X with
   X ~ N(0, delta^2) destroys almost every community pair.

Run from the repository root:  python3 demos/theory_tour.py [outdir]
"""

import os
import sys

import numpy as np

from commlab._random import substream
from commlab.plotting import write_svg
from commlab.theory import (
    block_construction,
    count_community_pairs,
    delta_sweep,
    gram_bound_campaign,
    gram_row_check,
    nsm,
    sweep_svg,
    verify_gram_bound,
    write_sweep_csv,
)

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
os.makedirs(out, exist_ok=True)

# %%
# The row-sum hypothesis has to use absolute values.  With signed sums the
# rank-one matrix x x^T below passes (every row sums to zero) while its six
# same-sign pairs all clear eps = 0.5, three times the bound of 2.
x = np.array([[1.0, 1, 1, -1, -1, -1]])
check = gram_row_check(x)
print("signed row sums ok:", check.signed_passes, " max absolute row sum:", check.max_row_sum)
print("pairs at 0.5:", count_community_pairs(x.T @ x, 0.5).count)

# %%
# Random matrices, rescaled so the hypothesis holds, never come close.
V = substream(0, 0).standard_normal((4, 60))
print(verify_gram_bound(V, 0.1, rescale=True))
campaign = gram_bound_campaign(instances=2000, seed=1)
print(f"{campaign.checks} checks, {campaign.violations} violations, "
      f"largest count/bound {campaign.max_count_to_bound:.2f}")

# %%
# Softmax: 64 blocks of 16 vertices in 56 dimensions.  Every intra-block
# entry of nsm(V) clears 1/(2b).
n, b = 1024, 16
e = block_construction(n, b, c=8, seed=0)
P = nsm(e)
block = np.arange(n) // b
print(f"d = {e.dim}; smallest intra-block entry {P[block[:, None] == block[None, :]].min():.4f} "
      f"vs 1/(2b) = {1 / (2 * b):.4f}")

# %%
# Now perturb the lengths and watch the pairs disappear.
reports = delta_sweep(e, 1 / (2 * b), deltas=(0.0, 0.001, 0.01, 0.03, 0.05, 0.1, 0.2), trials=10, seed=0)
for r in reports:
    print(f"delta {r.delta:<6g} survival {r.mean:.4f}")
write_sweep_csv(os.path.join(out, "survival.csv"), reports)
write_svg(os.path.join(out, "survival.svg"), sweep_svg(reports, "community pairs surviving length noise"))
