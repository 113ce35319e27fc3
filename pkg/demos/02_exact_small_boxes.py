"""
Exact answers on small boxes
============================

Everything on a box with at most 24 cells can be settled by running the
dynamics on every subset.  This script lists spanning-set counts, shows the
half-perimeter lower bound on spanning sets, and checks the seed and
crossing bounds against the exact probabilities.
"""

import math
import warnings

import numpy as np

from perclab import analytic as an
from perclab import oracle as orc

# Counts by size of spanning subsets of the 3x3 box
s = orc.enumerate_spanning((3, 3))
print("3x3 spanning counts :", s.counts)
print("3x3 minimal counts  :", s.minimal_counts)
print("smallest spanning set:", s.min_size, " half perimeter:", math.ceil(6 / 2))

# The Frobose rule needs m + n - 1 sites
for dims in [(2, 3), (3, 3), (3, 4)]:
    print(f"frobose {dims}: min size {orc.enumerate_spanning(dims, 'frobose').min_size}")

# P(3x3 internally spanned) is a polynomial in p
ps = np.array([0.01, 0.05, 0.1, 0.2, 0.5])
print("\np      exact        seeds bound")
with warnings.catch_warnings():
    warnings.simplefilter("ignore", an.RegimeWarning)
    for p in ps:
        exact = orc.exact_spanning_probability((3, 3), p)
        print(f"{p:<5}  {exact:.4e}   {an.seeds_bound((3, 3), an.q_of_p(p)).value:.4e}")

# Crossing a columns of height b: a two-state chain over columns,
# checked against all 2^(ab) subsets and the bound e^{-a g(bq)}
a, b, p = 4, 3, 0.2
tm = orc.exact_crossing_probability(a, b, p)
print(f"\ncrossing {a}x{b} at p={p}: chain {tm:.12f}  brute force "
      f"{orc.exact_crossing_probability_bruteforce(a, b, p):.12f}  bound "
      f"{an.crossing_bound(a, b, an.q_of_p(p)).value:.6f}")

# Disjoint occurrence on a 3x3 universe
from perclab.lattice import Rectangle
U = Rectangle.from_dims(3, 3)
r = orc.bk_disjoint_check(U, orc.InternallySpanned(Rectangle(1, 1, 2, 2)),
                          orc.InternallySpanned(Rectangle(2, 2, 3, 3)), 0.3)
print(f"P(B o C) = {r.lhs:.6f} <= P(B) P(C) = {r.rhs:.6f}")
