"""Compiled inner loops: closure, subset enumeration and rectangle scans.

Grids are ``uint8`` arrays indexed ``grid[x, y]``; anything outside the array
counts as uninfected.  Rule codes are the integers in ``RULE_CODES``.
"""

import numpy as np
from numba import njit

STANDARD, MODIFIED, FROBOSE, KCROSS = 0, 1, 2, 3
RULE_CODES = {"standard": STANDARD, "modified": MODIFIED, "frobose": FROBOSE, "kcross": KCROSS}


@njit(cache=True, nogil=True)
def _at(grid, x, y):
    if x < 0 or y < 0 or x >= grid.shape[0] or y >= grid.shape[1]:
        return 0
    return grid[x, y]


@njit(cache=True, nogil=True)
def infectable(grid, x, y, rule, k):
    """True if the (currently healthy) site ``(x, y)`` meets the rule."""
    if rule == STANDARD:
        c = _at(grid, x - 1, y) + _at(grid, x + 1, y) + _at(grid, x, y - 1) + _at(grid, x, y + 1)
        return c >= 2
    if rule == MODIFIED:
        horiz = _at(grid, x - 1, y) + _at(grid, x + 1, y)
        vert = _at(grid, x, y - 1) + _at(grid, x, y + 1)
        return horiz > 0 and vert > 0
    if rule == FROBOSE:
        for sx in (-1, 1):
            if _at(grid, x + sx, y):
                for sy in (-1, 1):
                    if _at(grid, x, y + sy) and _at(grid, x + sx, y + sy):
                        return True
        return False
    # k-cross: arms of length k-1, centre excluded
    c = 0
    for j in range(1, k):
        c += _at(grid, x - j, y) + _at(grid, x + j, y) + _at(grid, x, y - j) + _at(grid, x, y + j)
    return c >= k


@njit(cache=True, nogil=True)
def _offsets(rule, k):
    # sites whose neighbourhood contains the origin (all neighbourhoods are symmetric)
    if rule == STANDARD or rule == MODIFIED:
        out = np.empty((4, 2), np.int64)
        out[0] = (1, 0)
        out[1] = (-1, 0)
        out[2] = (0, 1)
        out[3] = (0, -1)
        return out
    if rule == FROBOSE:
        out = np.empty((8, 2), np.int64)
        i = 0
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx != 0 or dy != 0:
                    out[i] = (dx, dy)
                    i += 1
        return out
    m = max(k - 1, 0)
    out = np.empty((4 * m, 2), np.int64)
    i = 0
    for j in range(1, k):
        out[i] = (j, 0)
        out[i + 1] = (-j, 0)
        out[i + 2] = (0, j)
        out[i + 3] = (0, -j)
        i += 4
    return out


@njit(cache=True, nogil=True)
def closure_inplace(grid, rule, k):
    """Work-queue fixpoint.  Returns the number of infected sites."""
    w, h = grid.shape
    offs = _offsets(rule, k)
    queue = np.empty(w * h, np.int64)
    tail = 0
    for x in range(w):
        for y in range(h):
            if grid[x, y]:
                queue[tail] = x * h + y
                tail += 1
    head = 0
    while head < tail:
        s = queue[head]
        head += 1
        sx, sy = s // h, s % h
        for i in range(offs.shape[0]):
            x = sx + offs[i, 0]
            y = sy + offs[i, 1]
            if 0 <= x < w and 0 <= y < h and grid[x, y] == 0:
                if infectable(grid, x, y, rule, k):
                    grid[x, y] = 1
                    queue[tail] = x * h + y
                    tail += 1
    return tail


@njit(cache=True, nogil=True)
def percolates_batch(occupied, rule, k):
    """Closure-based percolation test for a stack of grids ``(trials, w, h)``."""
    n = occupied.shape[0]
    out = np.zeros(n, np.uint8)
    full = occupied.shape[1] * occupied.shape[2]
    for t in range(n):
        g = occupied[t].copy()
        if closure_inplace(g, rule, k) == full:
            out[t] = 1
    return out


@njit(cache=True, nogil=True)
def span_table(w, h, helper, cells, rule, k, prune):
    """Spanning indicator for every subset of ``cells`` placed on a ``w x h`` grid.

    ``helper`` is a ``w x h`` grid of permanently infected sites.  Bit ``i`` of
    a mask selects ``cells[i]``.  With ``prune`` a mask is marked spanning
    without a closure when some one-element-smaller subset already spans
    (monotonicity); masks are visited in increasing order so subsets come first.
    """
    m = cells.shape[0]
    total = 1 << m
    out = np.zeros(total, np.uint8)
    full = w * h
    g = np.empty((w, h), np.uint8)
    for mask in range(total):
        if prune:
            mm = mask
            hit = False
            while mm:
                low = mm & (-mm)
                if out[mask ^ low]:
                    hit = True
                    break
                mm ^= low
            if hit:
                out[mask] = 1
                continue
        g[:, :] = helper
        for i in range(m):
            if (mask >> i) & 1:
                g[cells[i, 0], cells[i, 1]] = 1
        if closure_inplace(g, rule, k) == full:
            out[mask] = 1
    return out


@njit(cache=True, nogil=True)
def span_table_range(w, h, helper, cells, rule, k, start, stop):
    """Un-pruned ``span_table`` restricted to masks in ``[start, stop)``."""
    m = cells.shape[0]
    out = np.zeros(stop - start, np.uint8)
    full = w * h
    g = np.empty((w, h), np.uint8)
    for mask in range(start, stop):
        g[:, :] = helper
        for i in range(m):
            if (mask >> i) & 1:
                g[cells[i, 0], cells[i, 1]] = 1
        if closure_inplace(g, rule, k) == full:
            out[mask - start] = 1
    return out


@njit(cache=True, nogil=True)
def internally_spanned(grid, x0, y0, x1, y1, rule, k):
    """Does the sub-box ``[x0..x1] x [y0..y1]`` of ``grid`` fill from its own sites?"""
    sub = grid[x0:x1 + 1, y0:y1 + 1].copy()
    return closure_inplace(sub, rule, k) == sub.shape[0] * sub.shape[1]


@njit(cache=True, nogil=True)
def scan_spanned_rectangle(grid, lo, hi, rule, k):
    """First sub-rectangle with ``lo <= lg <= hi`` internally spanned by ``grid``.

    Returns ``(x0, y0, x1, y1)`` or ``(-1, -1, -1, -1)``.  Boxes with an empty
    boundary row or column are skipped without a closure (an edge site has
    only one neighbour inside the box, so a fully empty edge never fills).
    """
    w, h = grid.shape
    # column-wise and row-wise prefix sums for O(1) edge occupancy checks
    colsum = np.zeros((w, h + 1), np.int64)
    rowsum = np.zeros((w + 1, h), np.int64)
    for x in range(w):
        for y in range(h):
            colsum[x, y + 1] = colsum[x, y] + grid[x, y]
            rowsum[x + 1, y] = rowsum[x, y] + grid[x, y]
    for big in range(lo, hi + 1):
        for small in range(1, big + 1):
            for orient in range(2):
                if orient == 1 and small == big:
                    continue
                dw = big if orient == 0 else small
                dh = small if orient == 0 else big
                if dw > w or dh > h:
                    continue
                for x0 in range(w - dw + 1):
                    x1 = x0 + dw - 1
                    for y0 in range(h - dh + 1):
                        y1 = y0 + dh - 1
                        if colsum[x0, y1 + 1] - colsum[x0, y0] == 0:
                            continue
                        if colsum[x1, y1 + 1] - colsum[x1, y0] == 0:
                            continue
                        if rowsum[x1 + 1, y0] - rowsum[x0, y0] == 0:
                            continue
                        if rowsum[x1 + 1, y1] - rowsum[x0, y1] == 0:
                            continue
                        if internally_spanned(grid, x0, y0, x1, y1, rule, k):
                            return x0, y0, x1, y1
    return -1, -1, -1, -1


@njit(cache=True, nogil=True)
def up_closure(table, nbits):
    """Smallest up-set containing ``table`` (superset-sum over the mask lattice)."""
    out = table.copy()
    total = 1 << nbits
    for b in range(nbits):
        bit = 1 << b
        for mask in range(total):
            if (mask & bit) == 0 and out[mask]:
                out[mask | bit] = 1
    return out


@njit(cache=True, nogil=True)
def minimal_masks(table, nbits):
    """Masks in ``table`` none of whose one-smaller subsets are in ``table``."""
    total = 1 << nbits
    flags = np.zeros(total, np.uint8)
    for mask in range(total):
        if table[mask]:
            ok = True
            mm = mask
            while mm:
                low = mm & (-mm)
                if table[mask ^ low]:
                    ok = False
                    break
                mm ^= low
            if ok:
                flags[mask] = 1
    return np.nonzero(flags)[0]


@njit(cache=True, nogil=True)
def disjoint_union_table(min_b, min_c, nbits):
    """Indicator of masks containing disjoint ``b | c`` with ``b`` in min_b, ``c`` in min_c."""
    out = np.zeros(1 << nbits, np.uint8)
    for i in range(min_b.shape[0]):
        b = min_b[i]
        for j in range(min_c.shape[0]):
            c = min_c[j]
            if b & c == 0:
                out[b | c] = 1
    return up_closure(out, nbits)


@njit(cache=True, nogil=True)
def merge_pairs(rects, w, h):
    """Index pairs ``i < j`` of boxes whose standard-rule closure is the ``w x h`` box.

    ``rects`` is ``(P, 4)`` of local ``(x0, y0, x1, y1)``.  Two full boxes fill
    their bounding box when their l1 gap ``dx + dy`` is at most 2 and stay
    separate otherwise, so the test is: close, and the hull is the whole box.
    """
    P = rects.shape[0]
    out = np.empty((64, 2), np.int64)
    n = 0
    for i in range(P):
        a0, b0, a1, b1 = rects[i, 0], rects[i, 1], rects[i, 2], rects[i, 3]
        for j in range(i + 1, P):
            c0, d0, c1, d1 = rects[j, 0], rects[j, 1], rects[j, 2], rects[j, 3]
            if min(a0, c0) != 0 or min(b0, d0) != 0:
                continue
            if max(a1, c1) != w - 1 or max(b1, d1) != h - 1:
                continue
            dx = max(0, max(c0 - a1, a0 - c1))
            dy = max(0, max(d0 - b1, b0 - d1))
            if dx + dy > 2:
                continue
            if n == out.shape[0]:
                grown = np.empty((2 * n, 2), np.int64)
                grown[:n] = out
                out = grown
            out[n, 0] = i
            out[n, 1] = j
            n += 1
    return out[:n]


@njit(cache=True, nogil=True)
def _spread(grid, queue, rule, k):
    """Propagate from the sites already in ``queue[0]``; returns sites added (queue included)."""
    w, h = grid.shape
    offs = _offsets(rule, k)
    head, tail = 0, 1
    while head < tail:
        s = queue[head]
        head += 1
        sx, sy = s // h, s % h
        for i in range(offs.shape[0]):
            x = sx + offs[i, 0]
            y = sy + offs[i, 1]
            if 0 <= x < w and 0 <= y < h and grid[x, y] == 0:
                if infectable(grid, x, y, rule, k):
                    grid[x, y] = 1
                    queue[tail] = x * h + y
                    tail += 1
    return tail


@njit(cache=True, nogil=True)
def percolation_threshold(u, rule, k):
    """Smallest ``p`` at which ``{site : u[site] < p}`` percolates, as the critical draw.

    Sites are switched on in increasing order of ``u`` and the closure is kept
    up to date incrementally; the trial percolates at ``p`` iff the returned
    draw is ``< p``.  Draws are sorted in bands of increasing value so that
    only the band containing the threshold is fully ordered.
    """
    w, h = u.shape
    flat = u.ravel()
    grid = np.zeros((w, h), np.uint8)
    queue = np.empty(w * h, np.int64)
    count = 0
    lo = 0.0
    for hi in (0.125, 0.5, 2.0):
        band = np.nonzero((flat >= lo) & (flat < hi))[0]
        order = band[np.argsort(flat[band])]
        for t in range(order.shape[0]):
            s = order[t]
            x, y = s // h, s % h
            if grid[x, y]:
                continue
            grid[x, y] = 1
            queue[0] = s
            count += _spread(grid, queue, rule, k)
            if count == w * h:
                return flat[s]
        lo = hi
    return 1.0
