"""Closed-form rate functions, their integrals, the path functional and bound evaluators.

All probability bounds are carried in natural-log scale (``BoundReport.log_value``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize

LAMBDA = math.pi ** 2 / 18

# frozen defaults for constants that are only asserted to exist
DELTA_SEEDS = 0.01
C_INTEGRAL = 2.0
C_BIG = 1.0
C_UPPER = 1.0
C_LOWER = 0.05
C_SLACK = 3.0


class QuadratureError(ArithmeticError):
    """Quadrature did not reach the requested accuracy."""


class RegimeWarning(UserWarning):
    """A bound was evaluated outside the parameter range it is proved for."""


# -- rate functions -----------------------------------------------------------

def beta(u):
    """``(u + sqrt(u (4 - 3u))) / 2`` on ``[0, 1]``."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
        raise ValueError("beta is defined on [0, 1]")
    out = (u + np.sqrt(u * (4 - 3 * u))) / 2
    return out if out.ndim else float(out)


def g(z):
    """``-log beta(1 - e^{-z})`` for ``z > 0``.

    For ``u = 1 - e^{-z} >= 1/2`` it uses
    ``beta - 1 = -2 e^{-2z} / (sqrt(u(4-3u)) + 1 + e^{-z})`` so the value
    stays accurate (about ``e^{-2z}``) for large ``z``.
    """
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise ValueError("g is defined for z > 0")
    eps = np.exp(-z)
    u = -np.expm1(-z)
    s = np.sqrt(u * (4 - 3 * u))
    with np.errstate(divide="ignore"):
        near_one = -np.log1p(-2 * eps * eps / (s + 1 + eps))
        small = -np.log((u + s) / 2)
    out = np.where(u >= 0.5, near_one, small)
    return out if out.ndim else float(out)


def h_frobose(z):
    """``-log(1 - e^{-z})``, the crossing rate when any empty column blocks."""
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise ValueError("h is defined for z > 0")
    with np.errstate(divide="ignore"):
        # log1p keeps relative accuracy once e^{-z} is small
        out = np.where(z > math.log(2), -np.log1p(-np.exp(-z)), -np.log(-np.expm1(-z)))
    return out if out.ndim else float(out)


def q_of_p(p):
    """``q = -log(1 - p)``."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise ValueError("p must lie in (0, 1)")
    out = -np.log1p(-p)
    return out if out.ndim else float(out)


def p_of_q(q):
    q = np.asarray(q, dtype=float)
    out = -np.expm1(-q)
    return out if out.ndim else float(out)


def lambda_k(k: int) -> float:
    """``pi^2 / (3 k (k + 1))``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return math.pi ** 2 / (3 * k * (k + 1))


class RootError(ArithmeticError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (residual {residual:g})")
        self.residual = residual


def _kcross_solution(x: float, k: int) -> tuple[float, float]:
    """``(f, 1 - f)`` for the decreasing solution of ``f^k (1 - f) = x^k (1 - x)``.

    ``y -> y^k (1 - y)`` rises on ``[0, k/(k+1)]`` and falls after, so the
    decreasing solution is the root on the other side of ``k/(k+1)`` from ``x``.
    """
    if not 0 < x < 1:
        raise ValueError("x must lie in (0, 1)")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return 1.0 - x, x
    peak = k / (k + 1)
    target = k * math.log(x) + math.log1p(-x)
    if x < peak:
        # solve for y = 1 - f in (0, 1/(k+1)] to keep relative accuracy when f -> 1
        def F(y):
            return math.log(y) + k * math.log1p(-y) - target
        hi = 1.0 / (k + 1)
        if F(hi) <= 0:
            return peak, 1 - peak
        # y (1 - y)^k = e^target forces y >= e^target
        lo = math.exp(target)
        if lo == 0.0:
            return 1.0, 0.0
        y = optimize.brentq(F, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        f = 1.0 - y
    elif x > peak:
        def F(f):
            return k * math.log(f) + math.log1p(-f) - target
        if F(peak) <= 0:
            return peak, 1 - peak
        lo = peak / 2
        while F(lo) > 0:
            lo *= 1e-3
        f = optimize.brentq(F, lo, peak, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        y = 1.0 - f
    else:
        return x, 1 - x
    resid = abs(f ** k - f ** (k + 1) - (x ** k - x ** (k + 1)))
    if resid > 1e-12:
        raise RootError("f_kcross did not converge", resid)
    return f, y


def f_kcross(x: float, k: int) -> float:
    """Decreasing solution ``f(x)`` of ``f^k - f^{k+1} = x^k - x^{k+1}`` on ``(0, 1)``."""
    return _kcross_solution(float(x), int(k))[0]


def g_kcross(z, k: int):
    """``-log f_k(e^{-z})``; equals ``h_frobose`` for ``k = 1`` and ``g`` for ``k = 2``."""
    def one(zz):
        if not zz > 0:
            raise ValueError("g_kcross is defined for z > 0")
        x = math.exp(-zz)
        if x == 0.0:
            return 0.0
        if x >= 1.0:
            x = np.nextafter(1.0, 0.0)
        f, y = _kcross_solution(x, k)
        return -math.log1p(-y) if y < 0.5 else -math.log(f)
    if np.ndim(z):
        return np.array([one(float(v)) for v in np.ravel(z)]).reshape(np.shape(z))
    return one(float(z))


# -- integrals ------------------------------------------------------------------

def integrate_rate(f: Callable, a: float, b: float, tol: float = 1e-9) -> float:
    """``∫_a^b f`` for a decreasing rate with a log singularity at 0.

    On ``(0, 1]`` the substitution ``z = e^{-t}`` turns the singular piece into
    an exponentially decaying integrand; ``b = inf`` is handled by QUADPACK's
    infinite-range rule.  Raises ``QuadratureError`` when the reported error
    exceeds ``tol``.
    """
    if not (0 <= a < b):
        raise ValueError(f"need 0 <= a < b, got a={a}, b={b}")
    total, err = 0.0, 0.0
    split = 1.0
    if a < split:
        top = min(b, split)
        # past t = 700 the remainder is below e^{-690} for any log-type rate
        t_hi = 700.0 if a == 0 else min(-math.log(a), 700.0)
        t_lo = -math.log(top)
        val, e = integrate.quad(lambda t: f(math.exp(-t)) * math.exp(-t), t_lo, t_hi,
                                epsabs=tol / 4, epsrel=0, limit=200)
        total += val
        err += e
    if b > split:
        lo = max(a, split)
        val, e = integrate.quad(f, lo, b, epsabs=tol / 4, epsrel=0, limit=200)
        total += val
        err += e
    if err > tol:
        raise QuadratureError(f"quadrature error estimate {err:g} exceeds {tol:g}")
    return total


@lru_cache(maxsize=65536)
def integral_g(a: float, b: float = math.inf, tol: float = 1e-9) -> float:
    """``∫_a^b g(z) dz``; ``integral_g(0)`` is the metastability constant pi^2/18."""
    if a == b:
        return 0.0
    return integrate_rate(g, float(a), float(b), tol)


def integral_h(a: float = 0.0, b: float = math.inf, tol: float = 1e-9) -> float:
    return integrate_rate(h_frobose, float(a), float(b), tol)


def integral_g_kcross(k: int, a: float = 0.0, b: float = math.inf, tol: float = 1e-9) -> float:
    return integrate_rate(lambda z: g_kcross(z, k), float(a), float(b), tol)


def integral_g_upper(a: float, C: float = C_INTEGRAL) -> float:
    """Upper bound ``(a/2) log(1 + 1/a) + C a`` for ``∫_0^a g``."""
    return a / 2 * math.log1p(1 / a) + C * a


def g_log_bracket(z: float) -> tuple[float, float]:
    """Small-``z`` bracket ``(log(1/sqrt z) - sqrt z, log(1/sqrt z) + z)`` around ``g(z)``."""
    base = -0.5 * math.log(z)
    return base - math.sqrt(z), base + z


def g_log_bracket_extent(zs) -> float:
    """Largest sampled ``z0`` such that the bracket holds at every sampled ``z <= z0``."""
    zs = np.sort(np.asarray(zs, dtype=float))
    base = -0.5 * np.log(zs)
    gz = g(zs)
    ok = (base - np.sqrt(zs) <= gz) & (gz <= base + zs)
    if not ok[0]:
        return 0.0
    bad = np.nonzero(~ok)[0]
    return float(zs[-1] if bad.size == 0 else zs[bad[0] - 1])


def eg_holds(a: int, q: float, B: float) -> bool:
    """``e^{2 g(aq)} <= 4B/(aq)`` (meaningful for ``a <= B/q``)."""
    z = a * q
    return 2 * g(z) <= math.log(4 * B / z)


# -- path functional ------------------------------------------------------------

class WgResult(NamedTuple):
    value: float          # Richardson-extrapolated staircase minimum
    dp: float             # staircase minimum on the requested grid
    dp_coarse: float      # same on the half-resolution grid
    diagonal: float       # cost of the diagonal-hugging path


def _staircase_min(a, b, n: int) -> float:
    (a1, a2), (b1, b2) = a, b
    xs = np.linspace(a1, b1, n + 1)
    ys = np.linspace(a2, b2, n + 1)
    dx = (b1 - a1) / n
    dy = (b2 - a2) / n
    gx = g(xs)
    gy = g(ys)
    idx = np.arange(n + 1)
    # column i = 0: climb at x = a1
    W = idx * (gx[0] * dy)
    for i in range(1, n + 1):
        V = W + gy * dx            # horizontal segment at height y_j costs g(y_j) dx
        c = gx[i] * dy             # vertical segment at x_i costs g(x_i) dy
        W = np.minimum.accumulate(V - idx * c) + idx * c
    return float(W[-1])


def diagonal_path_cost(a, b) -> float:
    """Cost of the increasing path that runs along the main diagonal where it can.

    From ``a`` it moves straight toward the diagonal, follows it to
    ``min(b1, b2)`` and then moves straight to ``b``.  When the diagonal is out
    of reach it is the L-shaped path that first moves in the lagging coordinate.
    """
    (a1, a2), (b1, b2) = map(tuple, (a, b))
    cost = 0.0
    x, y = a1, a2
    if x < y:
        nx = min(y, b1)
        cost += g(y) * (nx - x) if nx > x else 0.0
        x = nx
    elif y < x:
        ny = min(x, b2)
        cost += g(x) * (ny - y) if ny > y else 0.0
        y = ny
    if x == y:
        m = min(b1, b2)
        if m > x:
            cost += 2 * integral_g(x, m)
            x = y = m
    if x < b1:
        cost += g(y) * (b1 - x)
    if y < b2:
        cost += g(b1) * (b2 - y)
    return cost


def wg(a, b, grid_steps: int = 512) -> WgResult:
    """Minimum of ``∫ g(y) dx + g(x) dy`` over increasing paths from ``a`` to ``b``.

    Minimised by dynamic programming over monotone staircases on a uniform
    ``grid_steps x grid_steps`` grid (horizontal and vertical pieces integrate
    exactly), then extrapolated against the half grid assuming O(h^2) error.
    """
    a = (float(a[0]), float(a[1]))
    b = (float(b[0]), float(b[1]))
    if not (a[0] > 0 and a[1] > 0):
        raise ValueError("start point must lie in the open positive quadrant")
    if not (a[0] <= b[0] and a[1] <= b[1]):
        raise ValueError(f"need a <= b componentwise, got {a}, {b}")
    if grid_steps < 2 or grid_steps % 2:
        raise ValueError("grid_steps must be an even integer >= 2")
    if a == b:
        return WgResult(0.0, 0.0, 0.0, 0.0)
    fine = _staircase_min(a, b, grid_steps)
    coarse = _staircase_min(a, b, grid_steps // 2)
    if not (math.isfinite(fine) and math.isfinite(coarse)):
        raise ArithmeticError("path discretisation produced a non-finite value")
    value = fine - (coarse - fine) / 3
    return WgResult(value, fine, coarse, diagonal_path_cost(a, b))


@lru_cache(maxsize=65536)
def _u_cached(s_dims, r_dims, q, grid_steps):
    return wg((q * s_dims[0], q * s_dims[1]), (q * r_dims[0], q * r_dims[1]), grid_steps).value


def u_func(s_dims, r_dims, q: float, grid_steps: int = 512) -> float:
    """``W_g(q dim(S), q dim(R))``."""
    s_dims, r_dims = tuple(int(v) for v in s_dims), tuple(int(v) for v in r_dims)
    if not (s_dims[0] <= r_dims[0] and s_dims[1] <= r_dims[1]):
        raise ValueError(f"dims {s_dims} do not nest in {r_dims}")
    if q <= 0:
        raise ValueError("q must be positive")
    return _u_cached(s_dims, r_dims, float(q), int(grid_steps))


# -- bound evaluators -------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    """A probability bound in log scale with the inputs it was evaluated at."""

    formula: str
    log_value: float
    inputs: dict = field(default_factory=dict)
    in_regime: bool = True

    @property
    def value(self) -> float:
        return math.exp(min(self.log_value, 700.0))

    def dominates(self, prob: float) -> bool:
        """``bound >= prob``, compared in log scale."""
        if prob <= 0:
            return True
        return self.log_value >= math.log(prob)

    def to_dict(self) -> dict:
        return {"formula": self.formula, "log_value": self.log_value, "value": self.value,
                "in_regime": self.in_regime, "inputs": dict(self.inputs)}


def crossing_bound(a: int, b: int, q: float) -> BoundReport:
    """``e^{-a g(bq)}`` for crossing ``a`` columns of height ``b``."""
    if a < 1 or b < 1 or q <= 0:
        raise ValueError("need a, b >= 1 and q > 0")
    return BoundReport("crossing", -a * g(b * q), {"a": a, "b": b, "q": q})


def seeds_bound(r_dims, q: float, delta: float = DELTA_SEEDS) -> BoundReport:
    """``3^phi exp(-phi g(aq))`` with ``a`` the short side."""
    a, b = sorted(int(v) for v in r_dims)
    if a < 1 or q <= 0:
        raise ValueError("need positive dims and q")
    phi = a + b
    p = p_of_q(q)
    ok = a * p <= delta
    if not ok:
        warnings.warn(f"seeds bound evaluated with a*p = {a * p:.3g} > delta = {delta}",
                      RegimeWarning, stacklevel=2)
    return BoundReport("seeds", phi * math.log(3) - phi * g(a * q),
                       {"dims": (a, b), "q": q, "delta": delta}, ok)


def d_bound(s_dims, r_dims, q: float) -> BoundReport:
    """Bound on ``P(D(S, R))`` for ``dim S = (a, b)``, ``dim R = (a + s, b + t)``."""
    (a, b), (A, B) = s_dims, r_dims
    s, t = A - a, B - b
    if a < 1 or b < 1 or s < 0 or t < 0:
        raise ValueError(f"dims {s_dims} do not nest in {r_dims}")
    ga, gb = g(a * q), g(b * q)
    log_val = -s * gb - t * ga + 2 * (gb + ga) + q * s * t * math.exp(2 * gb + 2 * ga)
    return BoundReport("helper-spanning", log_val, {"s_dims": tuple(s_dims), "r_dims": tuple(r_dims), "q": q})


def usr_lower_bound(s_dims, r_dims, q: float, C_slack: float = C_SLACK) -> float:
    """Lower bound on ``U(S, R) / q`` with ``C_slack`` standing in for the O(phi(S)) term.

    Dims are transposed first if needed so that ``R = (A, B)`` has ``A <= B``.
    """
    (a, b), (A, B) = s_dims, r_dims
    if A > B:
        (a, b), (A, B) = (b, a), (B, A)
    if not (1 <= a <= A and 1 <= b <= B):
        raise ValueError(f"dims {s_dims} do not nest in {r_dims}")
    if b <= A:
        phi_s = a + b
        return (2 / q * integral_g(0.0, A * q) + (B - A) * g(A * q)
                - phi_s / 2 * math.log1p(1 / (phi_s * q)) - C_slack * phi_s)
    return (A - a) * g(b * q) + (B - b) * g(A * q)


def leading_exponent(a: float, b: float, q: float) -> float:
    """``(2/q) ∫_0^{aq} g + (b - a) g(aq)``, the cost of growing an ``a x b`` rectangle."""
    return 2 / q * integral_g(0.0, a * q) + (b - a) * g(a * q)


def prop_integral_bound(a: int, b: int, q: float, C_big: float = C_BIG,
                        eps: float = 0.01, C_regime: float = 10.0) -> BoundReport:
    """Upper bound on ``P(I(R))`` for ``dim R = (a, b)``, ``a <= b``.

    ``in_regime`` records whether ``eps/q <= a <= b <= (C_regime/q) log(1/q)``.
    """
    a, b = sorted((a, b))
    lead = leading_exponent(a, b, q)
    slack = C_big / math.sqrt(q) * math.log(1 / q) ** 3 if q < 1 else C_big / math.sqrt(q)
    ok = eps / q <= a and b <= C_regime / q * math.log(1 / q)
    return BoundReport("metastable-growth", -lead + slack,
                       {"a": a, "b": b, "q": q, "C_big": C_big, "eps": eps, "C_regime": C_regime}, ok)


def final_check(a: float, b: float, p: float) -> tuple[bool, float, float]:
    """Compare the growth cost with ``2 lambda / q - 1`` for ``b >= B/(2p)``, ``B = 10 log(1/p)``.

    Returns ``(holds, lhs, rhs)``.
    """
    q = q_of_p(p)
    lhs = leading_exponent(a, b, q)
    rhs = 2 * LAMBDA / q - 1
    return lhs >= rhs, lhs, rhs


# -- threshold window -----------------------------------------------------------------

class Window(NamedTuple):
    low: float
    high: float
    leading: float
    consistent: bool


def theorem_window(n: float | None = None, C_upper: float = C_UPPER, c_lower: float = C_LOWER,
                   log_n: float | None = None) -> Window:
    """Two-sided window for ``p_c([n]^2)`` with explicit constants.

    ``log_n`` may be passed instead of ``n`` for sizes beyond float range.
    """
    if log_n is None:
        if n is None or n < 16:
            raise ValueError("need n >= 16")
        log_n = math.log(n)
    elif log_n < math.log(16):
        raise ValueError("need log n >= log 16")
    lead = LAMBDA / log_n
    low = lead - C_upper * math.log(log_n) ** 3 / log_n ** 1.5
    high = lead - c_lower / log_n ** 1.5
    return Window(low, high, lead, low <= high)


def power_law_fit(log_n: float, coef: float = 0.45, power: float = 1.2) -> float:
    """Simulation-fitted form ``lambda / L - coef / L^power`` with ``L = log n``."""
    return LAMBDA / log_n - coef / log_n ** power


def power_law_fit_exit(C_upper: float = C_UPPER, coef: float = 0.45, power: float = 1.2) -> float:
    """``log log N`` beyond which the fitted form sits below the window.

    The prediction is below ``low`` iff ``coef * L^{1.5 - power} > C (log L)^3``
    with ``L = log n``; for large ``t = log L`` the log-ratio is increasing, so
    the last crossing is found by root-bracketing in ``t``.
    """
    gap = 1.5 - power

    def F(t):
        return math.log(coef) + gap * t - math.log(C_upper) - 3 * math.log(t)

    t0 = max(3 / gap, 1.0)      # F is increasing beyond 3/gap
    if F(t0) >= 0:
        # may already hold; walk left to the last sign change
        lo = t0
        while lo > 1e-3 and F(lo) >= 0:
            lo /= 2
        return optimize.brentq(F, lo, t0) if F(lo) < 0 else lo
    hi = t0
    while F(hi) < 0:
        hi *= 2
    return optimize.brentq(F, t0, hi, xtol=1e-12)
