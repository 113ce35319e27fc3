"""Exact small-instance computations by full subset enumeration and transfer matrices."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import _kernels as K
from .dynamics import STANDARD, UpdateRule, _as_rule
from .lattice import Configuration, Rectangle

DEFAULT_CAP = 24


class CapExceeded(ValueError):
    """The instance has more free cells than the enumeration cap allows."""


class NonMonotoneEvent(ValueError):
    """A supplied event is not increasing."""


def popcounts(nbits: int) -> np.ndarray:
    """Number of set bits of every mask below ``2**nbits``."""
    masks = np.arange(1 << nbits, dtype=np.uint32)
    pc = np.zeros(masks.shape, dtype=np.int64)
    for b in range(nbits):
        pc += (masks >> b) & 1
    return pc


def binomial_weights(counts, p: float) -> float:
    """``Σ_k counts[k] p^k (1-p)^{N-k}`` with ``N = len(counts) - 1``."""
    counts = np.asarray(counts, dtype=float)
    N = len(counts) - 1
    if p == 0.0:
        return float(counts[0])
    if p == 1.0:
        return float(counts[-1])
    k = np.arange(N + 1)
    nz = counts > 0
    logs = np.log(counts[nz]) + k[nz] * math.log(p) + (N - k[nz]) * math.log1p(-p)
    return float(np.exp(logs).sum())


def _cells_of(R: Rectangle, exclude: Optional[Rectangle] = None) -> np.ndarray:
    out = [(x - R.x_min, y - R.y_min) for x, y in R.sites()
           if exclude is None or not exclude.contains_site(x, y)]
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def _table(dims, helper_box, cells, rule: UpdateRule, method: str = "pruned", threads: int = 1):
    w, h = dims
    helper = np.zeros((w, h), dtype=np.uint8)
    if helper_box is not None:
        helper[helper_box] = 1
    m = len(cells)
    if method == "pruned":
        return K.span_table(w, h, helper, cells, rule.code, rule.k, True)
    if method != "naive":
        raise ValueError(f"unknown method {method!r}")
    total = 1 << m
    threads = max(1, int(threads))
    bounds = np.linspace(0, total, threads + 1).astype(np.int64)
    if threads == 1:
        return K.span_table_range(w, h, helper, cells, rule.code, rule.k, 0, total)
    with ThreadPoolExecutor(threads) as ex:
        parts = list(ex.map(lambda i: K.span_table_range(w, h, helper, cells, rule.code, rule.k,
                                                         int(bounds[i]), int(bounds[i + 1])),
                            range(threads)))
    return np.concatenate(parts)


@dataclass
class EnumerationSummary:
    """Exact spanning statistics of a ``dims`` rectangle under ``rule``.

    ``counts[k]`` is the number of ``k``-subsets whose closure inside the
    rectangle is the whole rectangle; ``minimal_counts[k]`` counts those with
    no spanning proper subset.  Bit ``i`` of a mask in ``table`` is the cell
    ``(i // height, i % height)``.
    """

    dims: tuple[int, int]
    rule: UpdateRule
    counts: list[int]
    minimal_counts: list[int]
    table: np.ndarray = field(repr=False)

    @property
    def min_size(self) -> Optional[int]:
        for k, c in enumerate(self.counts):
            if c:
                return k
        return None

    @property
    def total_spanning(self) -> int:
        return int(sum(self.counts))

    def probability(self, p: float) -> float:
        return binomial_weights(self.counts, p)

    def spanning_masks(self) -> np.ndarray:
        return np.nonzero(self.table)[0]

    def minimal_masks(self) -> np.ndarray:
        return K.minimal_masks(self.table, len(self.counts) - 1)

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "rule": str(self.rule), "min_size": self.min_size,
                "counts": list(self.counts), "minimal_counts": list(self.minimal_counts)}


def enumerate_spanning(dims, rule=STANDARD, cap: int = DEFAULT_CAP,
                       method: str = "pruned", threads: int = 1) -> EnumerationSummary:
    """Classify every subset of a ``dims`` rectangle as spanning or not.

    ``method="pruned"`` skips the closure for masks whose one-smaller subset
    already spans; ``"naive"`` recomputes every closure and may be split over
    ``threads``.  The result does not depend on either choice.
    """
    rule = _as_rule(rule)
    w, h = int(dims[0]), int(dims[1])
    if w < 1 or h < 1:
        raise ValueError("dims must be positive")
    N = w * h
    if N > cap:
        raise CapExceeded(f"{w}x{h} has {N} cells, above the cap of {cap}")
    R = Rectangle.from_dims(w, h)
    table = _table((w, h), None, _cells_of(R), rule, method, threads)
    pc = popcounts(N)
    counts = np.bincount(pc[table.astype(bool)], minlength=N + 1)
    minimal = K.minimal_masks(table, N)
    minimal_counts = np.bincount(pc[minimal], minlength=N + 1)
    return EnumerationSummary((w, h), rule, [int(c) for c in counts],
                              [int(c) for c in minimal_counts], table)


@lru_cache(maxsize=512)
def _span_counts(dims, rule: UpdateRule, cap: int) -> tuple[int, ...]:
    return tuple(enumerate_spanning(dims, rule, cap).counts)


def exact_spanning_probability(dims, p: float, rule=STANDARD, cap: int = DEFAULT_CAP) -> float:
    """``P_p(A ∩ R internally spans R)`` for ``dim R = dims``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    rule = _as_rule(rule)
    return binomial_weights(_span_counts((int(dims[0]), int(dims[1])), rule, cap), p)


@lru_cache(maxsize=4096)
def helper_span_counts(S: Rectangle, R: Rectangle, rule=STANDARD, cap: int = DEFAULT_CAP) -> tuple[int, ...]:
    """Counts by size of subsets of ``R \\ S`` that span ``R`` together with ``S``.

    Depends on ``S`` only through its position relative to ``R``.
    """
    rule = _as_rule(rule)
    if not R.contains(S):
        raise ValueError(f"{S} is not contained in {R}")
    key_S, key_R = S.translate(1 - R.x_min, 1 - R.y_min), R.translate(1 - R.x_min, 1 - R.y_min)
    if (key_S, key_R) != (S, R):
        return helper_span_counts(key_S, key_R, rule, cap)
    cells = _cells_of(R, exclude=S)
    if len(cells) > cap:
        raise CapExceeded(f"{len(cells)} free cells, above the cap of {cap}")
    table = _table(R.dims, S.local(R), cells, rule)
    counts = np.bincount(popcounts(len(cells))[table.astype(bool)], minlength=len(cells) + 1)
    return tuple(int(c) for c in counts)


def exact_helper_probability(S: Rectangle, R: Rectangle, p: float, rule=STANDARD,
                             cap: int = DEFAULT_CAP) -> float:
    """``P_p(D(S, R))``: ``R`` internally spanned by ``A ∪ S``."""
    return binomial_weights(helper_span_counts(S, R, _as_rule(rule), cap), p)


# -- crossing ---------------------------------------------------------------------

def exact_crossing_probability(a: int, b: int, p: float) -> float:
    """Probability that ``a`` columns of height ``b`` are crossed left to right.

    Two-state chain over columns (previous column empty or occupied), started
    from the occupied state that the infected half-plane provides; a column
    is empty with probability ``(1-p)^b``; paths with two consecutive empty
    columns are killed and the last column must be occupied.
    """
    if a < 1 or b < 1:
        raise ValueError("need a, b >= 1")
    e = (1 - p) ** b
    occ, emp = 1.0, 0.0
    for _ in range(a):
        occ, emp = (occ + emp) * (1 - e), occ * e
    return occ


def crossing_table(a: int, b: int) -> np.ndarray:
    """Crossing indicator for every subset of an ``a x b`` box by the column criterion."""
    n = a * b
    masks = np.arange(1 << n, dtype=np.uint64)
    colmask = np.uint64((1 << b) - 1)
    occupied = [((masks >> np.uint64(j * b)) & colmask) != 0 for j in range(a)]
    ok = occupied[-1].copy()
    for j in range(a - 1):
        ok &= occupied[j] | occupied[j + 1]
    return ok


def exact_crossing_probability_bruteforce(a: int, b: int, p: float) -> float:
    """Same quantity summed over all ``2^{ab}`` subsets."""
    if a * b > DEFAULT_CAP:
        raise CapExceeded("too many cells for brute force")
    ok = crossing_table(a, b)
    counts = np.bincount(popcounts(a * b)[ok], minlength=a * b + 1)
    return binomial_weights(counts, p)


def crossing_bruteforce_generative(a: int, b: int, p: float) -> float:
    """Brute force using the half-plane closure definition of crossing."""
    from .dynamics import crosses_left_right_generative

    R = Rectangle.from_dims(a, b)
    n = a * b
    counts = np.zeros(n + 1, dtype=np.int64)
    cells = list(R.sites())
    for mask in range(1 << n):
        A = Configuration.from_sites(R, [c for i, c in enumerate(cells) if (mask >> i) & 1])
        if crosses_left_right_generative(A, R):
            counts[bin(mask).count("1")] += 1
    return binomial_weights(counts, p)


# -- increasing events and disjoint occurrence -----------------------------------------

class IncreasingEvent:
    """An up-set of configurations on a universe rectangle.

    Subclasses provide ``table(universe)``: a ``uint8`` array over masks of
    the universe's cells, with bit ``i`` the ``i``-th site of ``universe.sites()``.
    """

    name = "event"

    def table(self, universe: Rectangle) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return self.name


def _submask_map(universe: Rectangle, S: Rectangle) -> tuple[np.ndarray, list[int]]:
    """Map universe masks to masks over the cells of ``S`` (in ``S.sites()`` order)."""
    index = {c: i for i, c in enumerate(universe.sites())}
    bits = [index[c] for c in S.sites()]
    masks = np.arange(1 << universe.area, dtype=np.int64)
    sub = np.zeros_like(masks)
    for j, i in enumerate(bits):
        sub |= ((masks >> i) & 1) << j
    return sub, bits


class SiteOccupied(IncreasingEvent):
    def __init__(self, site):
        self.site = tuple(site)
        self.name = f"occupied{self.site}"

    def table(self, universe):
        i = list(universe.sites()).index(self.site)
        masks = np.arange(1 << universe.area, dtype=np.int64)
        return ((masks >> i) & 1).astype(np.uint8)


class AnyOccupied(IncreasingEvent):
    """Some site of the box ``S`` is occupied."""

    def __init__(self, S: Rectangle):
        self.S = S
        self.name = f"any{S}"

    def table(self, universe):
        sub, _ = _submask_map(universe, self.S)
        return (sub != 0).astype(np.uint8)


class InternallySpanned(IncreasingEvent):
    """``I(S)``."""

    def __init__(self, S: Rectangle, rule=STANDARD):
        self.S, self.rule = S, _as_rule(rule)
        self.name = f"I{S}"

    def table(self, universe):
        sub, _ = _submask_map(universe, self.S)
        local = _table(self.S.dims, None, _cells_of(self.S), self.rule)
        return local[sub]


class HelperSpans(IncreasingEvent):
    """``D(S, R)``."""

    def __init__(self, S: Rectangle, R: Rectangle, rule=STANDARD):
        if not R.contains(S):
            raise ValueError(f"{S} is not contained in {R}")
        self.S, self.R, self.rule = S, R, _as_rule(rule)
        self.name = f"D{S}{R}"

    def table(self, universe):
        sub, _ = _submask_map(universe, self.R)
        cells_all = _cells_of(self.R)
        free = [i for i, c in enumerate(cells_all) if not self.S.contains_site(c[0] + self.R.x_min, c[1] + self.R.y_min)]
        local = _table(self.R.dims, self.S.local(self.R), cells_all[free], self.rule)
        # compress R-masks to masks over the free cells
        comp = np.zeros_like(sub)
        for j, i in enumerate(free):
            comp |= ((sub >> i) & 1) << j
        return local[comp]


class Crosses(IncreasingEvent):
    """Left-to-right crossing of ``R``."""

    def __init__(self, R: Rectangle):
        self.R = R
        self.name = f"cross{R}"

    def table(self, universe):
        sub, _ = _submask_map(universe, self.R)
        return crossing_table(*self.R.dims)[sub].astype(np.uint8)


class PredicateEvent(IncreasingEvent):
    """Event given by a Python predicate on configurations (evaluated on every subset)."""

    def __init__(self, fn: Callable[[Configuration], bool], name: str = "predicate"):
        self.fn, self.name = fn, name

    def table(self, universe):
        cells = list(universe.sites())
        out = np.zeros(1 << len(cells), dtype=np.uint8)
        for mask in range(out.size):
            A = Configuration.from_sites(universe, [c for i, c in enumerate(cells) if (mask >> i) & 1])
            out[mask] = bool(self.fn(A))
        return out


def check_increasing(table: np.ndarray, nbits: int) -> bool:
    masks = np.arange(1 << nbits, dtype=np.int64)
    t = table.astype(bool)
    for b in range(nbits):
        if np.any(t & ~t[masks | (1 << b)]):
            return False
    return True


@dataclass(frozen=True)
class BKResult:
    lhs: float      # P(B ∘ C)
    rhs: float      # P(B) P(C)
    p_b: float
    p_c: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12) + 1e-15


def event_probability(table: np.ndarray, nbits: int, p: float) -> float:
    counts = np.bincount(popcounts(nbits)[table.astype(bool)], minlength=nbits + 1)
    return binomial_weights(counts, p)


def bk_disjoint_check(universe: Rectangle, event_b: IncreasingEvent, event_c: IncreasingEvent,
                      p: float, max_cells: int = 20) -> BKResult:
    """Exact ``P(B ∘ C)`` against ``P(B) P(C)`` on a small universe.

    ``B ∘ C`` holds for ``A`` iff some minimal witness of ``B`` and some
    minimal witness of ``C`` are disjoint and both lie in ``A``.
    """
    n = universe.area
    if n > max_cells:
        raise CapExceeded(f"universe has {n} cells, above {max_cells}")
    tb = np.ascontiguousarray(event_b.table(universe), dtype=np.uint8)
    tc = np.ascontiguousarray(event_c.table(universe), dtype=np.uint8)
    for ev, t in ((event_b, tb), (event_c, tc)):
        if not check_increasing(t, n):
            raise NonMonotoneEvent(f"{ev!r} is not an increasing event")
    joint = K.disjoint_union_table(K.minimal_masks(tb, n), K.minimal_masks(tc, n), n)
    pb, pc = event_probability(tb, n, p), event_probability(tc, n, p)
    return BKResult(event_probability(joint, n, p), pb * pc, pb, pc)
