"""
Rate functions and the metastability constant
=============================================

The standard two-neighbour model grows a rectangle one column at a time, and
the cost of each column is governed by the rate function g.  Its integral over
the half line is the constant lambda that sets the first-order behaviour of
the critical probability.
"""

import math

import numpy as np

from perclab import analytic as an

# g(z) = -log beta(1 - e^{-z}), with beta(u) the larger root of x^2 = x + u(1-x)
z = np.array([0.01, 0.1, 0.5, 1.0, 2.0, 5.0])
for zi, gi in zip(z, an.g(z)):
    print(f"g({zi:5.2f}) = {gi:.10f}")

# near 0 g behaves like -log z / 2, far out like e^{-2z}
print("log bracket at z=0.01:", an.g_log_bracket(0.01))

# The integral is pi^2/18; quadrature splits the log singularity off at 0
lam = an.integral_g(0.0)
print(f"\nint_0^inf g = {lam:.12f}   pi^2/18 = {math.pi ** 2 / 18:.12f}")

# The Frobose rate -log(1 - e^{-z}) integrates to pi^2/6 instead
print(f"int_0^inf h = {an.integral_h():.12f}   pi^2/6  = {math.pi ** 2 / 6:.12f}")

# k-cross rates: lambda_k = pi^2 / (3 k (k+1)), and k = 2 is the standard model
for k in (2, 3, 4, 5):
    print(f"k={k}: quadrature {an.integral_g_kcross(k):.9f}  closed form {an.lambda_k(k):.9f}")
