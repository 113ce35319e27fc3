"""
Hierarchies on a 4x4 box
========================

A spanned box can be described by a tree of sub-boxes: seeds at the leaves,
single-child steps that grow a box a little, and two-child steps that merge
two boxes.  Summing the probabilities of all good trees bounds the spanning
probability from above.
"""

import numpy as np

from perclab import hierarchy as hi
from perclab import oracle as orc
from perclab.lattice import Configuration, Rectangle

R = Rectangle.from_dims(4, 4)
P = hi.GoodnessParams(T=0.3, Z=2)

print("good hierarchies of 4x4:", hi.count_good(R, P))
print("largest height         :", hi.max_height(R, P), " bound:", round(hi.height_bound(R, P), 2))

# Build a tree for one spanning set, with disjoint certificates for each event
A = Configuration.from_sites(R, [(1, 1), (2, 2), (3, 3), (4, 4)])
H = hi.build_hierarchy(A, R, P)
print("\ntree for the diagonal:", H)
for event, sites in hi.satisfaction_witness(H, A):
    print("  ", event[0], [str(r) for r in event[1:]], "<-", sites)

# The sum over trees against the exact probability
for p in (0.05, 0.1, 0.2):
    b = hi.basic_upper_bound(R, P, p)
    print(f"p={p}: sum over trees {b.value:.5f}   exact {orc.exact_spanning_probability((4, 4), p):.5f}")

# Every good tree has a pod
en = hi.enumerate_good(R, P)
pods = [hi.pod_search(H, 0.1, P) for H in en.hierarchies]
print("\ntrees without a pod:", sum(x is None for x in pods))
print("pod dims seen      :", sorted({x.dims for x in pods}))
