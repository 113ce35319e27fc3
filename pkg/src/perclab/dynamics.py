"""Bootstrap update rules, closure, and spanning / crossing predicates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .lattice import Configuration, Rectangle


@dataclass(frozen=True)
class UpdateRule:
    """One of the infection rules on the square grid.

    ``standard``  at least two of the four nearest neighbours infected.
    ``modified``  an infected neighbour in each coordinate direction.
    ``frobose``   as ``modified`` plus the diagonal site between those two.
    ``kcross``    at least ``k`` infected sites among ``v + (j, 0), v + (0, j)``
                  for ``0 < |j| < k``.  With ``k = 1`` the cross is empty and no
                  site is ever infected; ``kcross:2`` is the standard rule.
    """

    variant: str = "standard"
    k: int = 0

    def __post_init__(self):
        if self.variant not in K.RULE_CODES:
            raise ValueError(f"unknown rule variant {self.variant!r}")
        if self.variant == "kcross":
            if self.k < 1:
                raise ValueError("kcross needs k >= 1")
        elif self.k != 0:
            raise ValueError(f"{self.variant} takes no k parameter")

    @classmethod
    def parse(cls, text: str) -> "UpdateRule":
        """``standard | modified | frobose | kcross:K``."""
        text = text.strip().lower()
        if text.startswith("kcross"):
            _, _, k = text.partition(":")
            if not k.isdigit():
                raise ValueError(f"expected kcross:K, got {text!r}")
            return cls("kcross", int(k))
        if text in ("standard", "standard2", "two-neighbour"):
            return cls("standard")
        return cls(text)

    @property
    def code(self) -> int:
        return K.RULE_CODES[self.variant]

    def __str__(self):
        return f"kcross:{self.k}" if self.variant == "kcross" else self.variant


STANDARD = UpdateRule("standard")
MODIFIED = UpdateRule("modified")
FROBOSE = UpdateRule("frobose")


def _as_rule(rule) -> UpdateRule:
    if isinstance(rule, UpdateRule):
        return rule
    return UpdateRule.parse(rule)


def _grid_u8(A: Configuration) -> np.ndarray:
    return A.grid.astype(np.uint8)


# -- one synchronous update ---------------------------------------------------

def _infect_mask(grid: np.ndarray, rule: UpdateRule) -> np.ndarray:
    """Vectorised infection condition over the whole grid (healthy or not)."""
    w, h = grid.shape
    pad = max(rule.k - 1, 1)
    P = np.zeros((w + 2 * pad, h + 2 * pad), dtype=np.int16)
    P[pad:pad + w, pad:pad + h] = grid

    def s(dx, dy):
        return P[pad + dx: pad + dx + w, pad + dy: pad + dy + h]

    if rule.variant == "standard":
        return (s(-1, 0) + s(1, 0) + s(0, -1) + s(0, 1)) >= 2
    if rule.variant == "modified":
        return ((s(-1, 0) | s(1, 0)) & (s(0, -1) | s(0, 1))).astype(bool)
    if rule.variant == "frobose":
        out = np.zeros((w, h), dtype=bool)
        for sx in (-1, 1):
            for sy in (-1, 1):
                out |= (s(sx, 0) & s(0, sy) & s(sx, sy)).astype(bool)
        return out
    c = np.zeros((w, h), dtype=np.int16)
    for j in range(1, rule.k):
        c += s(-j, 0) + s(j, 0) + s(0, -j) + s(0, j)
    return c >= rule.k


def step(A: Configuration, rule=STANDARD) -> Configuration:
    """One synchronous update ``A_{t+1} = A_t ∪ {v : v meets the rule w.r.t. A_t}``."""
    rule = _as_rule(rule)
    return Configuration(A.bounds, A.grid | _infect_mask(A.grid, rule))


# -- closure ------------------------------------------------------------------

def closure_grid(grid: np.ndarray, rule=STANDARD) -> np.ndarray:
    """Closure of a raw boolean grid (work queue)."""
    rule = _as_rule(rule)
    g = np.ascontiguousarray(grid, dtype=np.uint8).copy()
    K.closure_inplace(g, rule.code, rule.k)
    return g.astype(bool)


def closure(A: Configuration, rule=STANDARD) -> Configuration:
    """Least fixed point of the rule containing ``A``; outside ``A.bounds`` is healthy."""
    return Configuration(A.bounds, closure_grid(A.grid, rule))


def closure_sweep(A: Configuration, rule=STANDARD) -> Configuration:
    """Closure by repeated whole-grid synchronous updates.

    Slow but simple; it is the reference the work-queue closure is checked against.
    """
    rule = _as_rule(rule)
    g = A.grid.copy()
    while True:
        new = g | _infect_mask(g, rule)
        if np.array_equal(new, g):
            return Configuration(A.bounds, g)
        g = new


def percolates(A: Configuration, rule=STANDARD) -> bool:
    rule = _as_rule(rule)
    g = _grid_u8(A)
    return K.closure_inplace(g, rule.code, rule.k) == g.size


def internally_spans(A: Configuration, S: Rectangle, rule=STANDARD) -> bool:
    """Event ``I(S)``: the closure of ``A ∩ S`` computed inside ``S`` covers ``S``."""
    if not A.bounds.contains(S):
        raise ValueError(f"{S} is not inside the bounds {A.bounds}")
    rule = _as_rule(rule)
    sub = np.ascontiguousarray(A.grid[S.local(A.bounds)], dtype=np.uint8)
    return K.closure_inplace(sub, rule.code, rule.k) == sub.size


def spans_with_helper(A: Configuration, S: Rectangle, R: Rectangle, rule=STANDARD) -> bool:
    """Event ``D(S, R)``: ``R`` is internally spanned by ``A ∪ S``."""
    if not R.contains(S):
        raise ValueError(f"{S} is not contained in {R}")
    if not A.bounds.contains(R):
        raise ValueError(f"{R} is not inside the bounds {A.bounds}")
    rule = _as_rule(rule)
    sub = np.ascontiguousarray(A.grid[R.local(A.bounds)], dtype=np.uint8)
    sub[S.local(R)] = 1
    return K.closure_inplace(sub, rule.code, rule.k) == sub.size


# -- crossing -------------------------------------------------------------------

def crosses_left_right(A: Configuration, R: Rectangle) -> bool:
    """Standard-rule left-to-right crossing of ``R`` by ``A ∩ R``.

    Decided by the column criterion: no two adjacent empty columns and the
    last column occupied.
    """
    if not A.bounds.contains(R):
        raise ValueError(f"{R} is not inside the bounds {A.bounds}")
    occupied = A.grid[R.local(A.bounds)].any(axis=1)
    return _columns_cross(occupied)


def _columns_cross(occupied) -> bool:
    occupied = np.asarray(occupied, dtype=bool)
    if not occupied[-1]:
        return False
    empty = ~occupied
    return not bool(np.any(empty[:-1] & empty[1:]))


def crosses_left_right_generative(A: Configuration, R: Rectangle) -> bool:
    """Crossing from the definition ``R ⊂ [A ∪ {x <= x_min - 1}]``.

    The half-plane is truncated to one infected column to the left of ``R``
    and ``width + height`` healthy rows above and below; no other site of the
    half-plane or of the padding can reach ``R`` sooner.
    """
    if not A.bounds.contains(R):
        raise ValueError(f"{R} is not inside the bounds {A.bounds}")
    w, h = R.dims
    m = w + h
    g = np.zeros((w + 1, h + 2 * m), dtype=np.uint8)
    g[0, :] = 1
    g[1:, m:m + h] = A.grid[R.local(A.bounds)]
    K.closure_inplace(g, K.STANDARD, 0)
    return bool(g[1:, m:m + h].all())


# -- spanned sub-rectangle at a given scale-------------------------------------------

def find_spanned_rectangle_at_scale(A: Configuration, L: int, rule=STANDARD,
                                    mode: str = "exhaustive") -> Optional[Rectangle]:
    """An internally spanned sub-rectangle with ``L <= lg <= 2L``, or ``None``.

    ``mode="exhaustive"`` scans every sub-box in the scale window (longest
    side ``L`` first) and is limited to grids with sides at most 128.
    ``mode="merge"`` runs the rectangle-merging process on the sites of ``A``
    and returns the first merged rectangle that reaches the window; it
    applies to the standard rule only.
    """
    rule = _as_rule(rule)
    n = A.bounds.lg
    if not 1 <= L <= n:
        raise ValueError(f"L must lie in [1, {n}], got {L}")
    if mode == "exhaustive":
        if n > 128:
            raise ValueError("exhaustive scan is limited to grids with sides <= 128")
        x0, y0, x1, y1 = K.scan_spanned_rectangle(_grid_u8(A), L, 2 * L, rule.code, rule.k)
        if x0 < 0:
            return None
        b = A.bounds
        return Rectangle(int(x0) + b.x_min, int(y0) + b.y_min, int(x1) + b.x_min, int(y1) + b.y_min)
    if mode == "merge":
        if rule.variant != "standard":
            raise ValueError("merge mode is defined for the standard rule")
        return _merge_witness(A, L)
    raise ValueError(f"unknown mode {mode!r}")


def _close_enough(r: Rectangle, s: Rectangle) -> bool:
    # l1 distance between the boxes at most 2, i.e. [r ∪ s] is their bounding box
    dx = max(0, s.x_min - r.x_max, r.x_min - s.x_max)
    dy = max(0, s.y_min - r.y_max, r.y_min - s.y_max)
    return dx + dy <= 2


def _hull(r: Rectangle, s: Rectangle) -> Rectangle:
    return Rectangle(min(r.x_min, s.x_min), min(r.y_min, s.y_min),
                     max(r.x_max, s.x_max), max(r.y_max, s.y_max))


def merge_rectangles(A: Configuration, L: Optional[int] = None) -> tuple[list[Rectangle], Optional[Rectangle]]:
    """Rectangle process: start from 1x1 boxes at the sites of ``A``, merge close pairs.

    Every rectangle produced is internally spanned by ``A``.  Returns the final
    rectangles and, if ``L`` is given, the first one created with
    ``L <= lg <= 2L`` (merging two boxes with ``lg < L`` yields ``lg <= 2L - 1``).
    """
    rects = [Rectangle(x, y, x, y) for x, y in A.sites()]
    witness = None
    if L is not None and L == 1 and rects:
        witness = rects[0]
    stack = list(range(len(rects)))
    alive = [True] * len(rects)
    while stack:
        i = stack.pop()
        if not alive[i]:
            continue
        r = rects[i]
        for j, s in enumerate(rects):
            if j != i and alive[j] and _close_enough(r, s):
                alive[i] = alive[j] = False
                merged = _hull(r, s)
                rects.append(merged)
                alive.append(True)
                stack.append(len(rects) - 1)
                if witness is None and L is not None and L <= merged.lg <= 2 * L:
                    witness = merged
                break
    return [r for r, a in zip(rects, alive) if a], witness


def _merge_witness(A: Configuration, L: int) -> Optional[Rectangle]:
    final, witness = merge_rectangles(A, L)
    return witness
