"""Hierarchies of nested rectangles: validation, goodness, satisfaction, search and bounds.

A hierarchy is stored as a tree of :class:`Hierarchy` nodes, each carrying its
rectangle and an ordered tuple of 0, 1 or 2 children.  Nodes are addressed by
their path from the root, a tuple of child indices.  Binary children are kept
in increasing rectangle order so mirror images are the same object.

Everything here is for the standard two-neighbour rule.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, NamedTuple, Optional

import numpy as np

from . import _kernels as K
from .analytic import RegimeWarning, d_bound, g, q_of_p, seeds_bound, u_func
from .dynamics import closure_grid
from .lattice import Configuration, Rectangle, deficiency
from .oracle import exact_helper_probability, exact_spanning_probability, helper_span_counts

SATISFY_CAP = 20
EXACT_D_CELLS = 16


@dataclass(frozen=True)
class Hierarchy:
    rect: Rectangle
    children: tuple["Hierarchy", ...] = ()

    def __post_init__(self):
        if len(self.children) == 2 and self.children[1].rect < self.children[0].rect:
            object.__setattr__(self, "children", (self.children[1], self.children[0]))

    @property
    def kind(self) -> str:
        return {0: "seed", 1: "unary", 2: "binary"}.get(len(self.children), "invalid")

    def nodes(self, path=()) -> Iterator[tuple[tuple[int, ...], "Hierarchy"]]:
        """Pre-order ``(path, node)`` pairs."""
        yield path, self
        for i, c in enumerate(self.children):
            yield from c.nodes(path + (i,))

    def node(self, path) -> "Hierarchy":
        out = self
        for i in path:
            out = out.children[i]
        return out

    def seeds(self) -> list[Rectangle]:
        return [n.rect for _, n in self.nodes() if not n.children]

    def unary_pairs(self) -> list[tuple[Rectangle, Rectangle]]:
        """``(R_v, R_u)`` for every node ``u`` with single child ``v``."""
        return [(n.children[0].rect, n.rect) for _, n in self.nodes() if len(n.children) == 1]

    @property
    def size(self) -> int:
        return sum(1 for _ in self.nodes())

    @property
    def height(self) -> int:
        return 1 + max(c.height for c in self.children) if self.children else 0

    def to_dict(self) -> dict:
        r = self.rect
        return {"rect": [r.x_min, r.y_min, r.x_max, r.y_max],
                "children": [c.to_dict() for c in self.children]}

    @classmethod
    def from_dict(cls, d: dict) -> "Hierarchy":
        return cls(Rectangle(*d["rect"]), tuple(cls.from_dict(c) for c in d["children"]))

    def __str__(self):
        if not self.children:
            return str(self.rect)
        return f"{self.rect}<{' '.join(str(c) for c in self.children)}>"


def seed(rect: Rectangle) -> Hierarchy:
    return Hierarchy(rect)


class Violation(NamedTuple):
    node: tuple[int, ...]
    condition: str
    message: str


@dataclass(frozen=True)
class GoodnessParams:
    """Step size ``T`` in (0, 1) and seed scale ``Z > 1``.

    Both are held as exact fractions (decimal literals are converted from
    their shortest string form, so ``0.3`` is exactly 3/10).
    """

    T: Fraction
    Z: Fraction

    def __init__(self, T, Z):
        T = T if isinstance(T, Fraction) else Fraction(str(T))
        Z = Z if isinstance(Z, Fraction) else Fraction(str(Z))
        if not 0 < T < 1:
            raise ValueError(f"T must lie in (0, 1), got {T}")
        if not Z > 1:
            raise ValueError(f"Z must exceed 1, got {Z}")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "Z", Z)

    def is_seed_rect(self, R: Rectangle) -> bool:
        return R.sh <= self.Z


# -- structure (a)-(d) -------------------------------------------------------------

def merges_to(children: tuple[Rectangle, Rectangle], parent: Rectangle) -> bool:
    """Closure of the two boxes, as fully infected sets in ``parent``, is ``parent``."""
    grid = np.zeros(parent.dims, dtype=bool)
    for c in children:
        grid[c.local(parent)] = True
    return bool(closure_grid(grid).all())


def validate(H: Hierarchy, R: Optional[Rectangle] = None) -> list[Violation]:
    """Structural violations; empty iff ``H`` is a hierarchy (for ``R`` when given)."""
    out = []
    if R is not None and H.rect != R:
        out.append(Violation((), "a", f"root is {H.rect}, expected {R}"))
    for path, u in H.nodes():
        if len(u.children) > 2:
            out.append(Violation(path, "b", f"{len(u.children)} children"))
            continue
        nested = True
        for i, c in enumerate(u.children):
            if not u.rect.contains(c.rect):
                nested = False
                out.append(Violation(path + (i,), "c", f"{c.rect} not inside {u.rect}"))
        if len(u.children) == 2 and nested and not merges_to((u.children[0].rect, u.children[1].rect), u.rect):
            out.append(Violation(path, "d", f"children of {u.rect} do not close to it"))
    return out


# -- goodness (g)-(j) ----------------------------------------------------------------

def goodness_violations(H: Hierarchy, params: GoodnessParams) -> list[Violation]:
    bad = validate(H)
    if bad:
        raise ValueError(f"not a valid hierarchy: {bad}")
    T, out = params.T, []
    for path, u in H.nodes():
        is_seed = not u.children
        if is_seed != params.is_seed_rect(u.rect):
            out.append(Violation(path, "j", f"sh={u.rect.sh}, Z={params.Z}, seed={is_seed}"))
        if len(u.children) == 1:
            v = u.children[0]
            d = deficiency(v.rect, u.rect).d
            if len(v.children) == 1:
                if not T <= d <= 2 * T:
                    out.append(Violation(path, "g", f"d={d} outside [{T}, {2 * T}]"))
            elif d > 2 * T:
                out.append(Violation(path, "h", f"d={d} > {2 * T}"))
        elif len(u.children) == 2:
            for i, v in enumerate(u.children):
                d = deficiency(v.rect, u.rect).d
                if d < T:
                    out.append(Violation(path + (i,), "i", f"d={d} < {T}"))
    return out


def is_good(H: Hierarchy, params: GoodnessParams) -> bool:
    """Conditions (g)-(j); raises ``ValueError`` on a structurally invalid ``H``."""
    return not goodness_violations(H, params)


# -- statistics --------------------------------------------------------------------

@dataclass(frozen=True)
class HierarchyStats:
    N: int              # nodes
    M: int              # binary nodes
    h: int              # height
    m: int              # large seeds, phi >= Z/3
    X: int              # sum of seed semi-perimeters
    height_bound: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def height_bound(R: Rectangle, params: GoodnessParams) -> float:
    """``(8/T) log(phi(R)/Z) + 1``."""
    return 8 / float(params.T) * math.log(R.phi / float(params.Z)) + 1


def stats(H: Hierarchy, params: GoodnessParams) -> HierarchyStats:
    nodes = [u for _, u in H.nodes()]
    seeds = [u.rect for u in nodes if not u.children]
    large = sum(1 for s in seeds if 3 * s.phi >= params.Z)
    return HierarchyStats(N=len(nodes), M=sum(1 for u in nodes if len(u.children) == 2),
                          h=H.height, m=large, X=sum(s.phi for s in seeds),
                          height_bound=height_bound(H.rect, params))


def stats_violations(H: Hierarchy, params: GoodnessParams) -> list[str]:
    """Checks every good hierarchy must pass: height, ``X >= mZ/3``, ``N <= 2mh + 1``."""
    s, out = stats(H, params), []
    if s.h > s.height_bound + 1e-12:
        out.append(f"height {s.h} > bound {s.height_bound:.4f}")
    if 3 * s.X < s.m * params.Z:
        out.append(f"X={s.X} < m Z / 3")
    if s.m >= 1 and s.N > 2 * s.m * s.h + 1:
        out.append(f"N={s.N} > 2 m h + 1 = {2 * s.m * s.h + 1}")
    return out


def large_seed_property(H: Hierarchy, params: GoodnessParams) -> bool:
    """Every node is a seed or has a large seed (``phi >= Z/3``) below it."""

    def has_large(u: Hierarchy) -> bool:
        if not u.children:
            return 3 * u.rect.phi >= params.Z
        return any(has_large(c) for c in u.children)

    return all(not u.children or has_large(u) for _, u in H.nodes())


# -- candidate children (translation invariant, cached on dims) ------------------------

@lru_cache(maxsize=None)
def _local_subrects(w: int, h: int) -> np.ndarray:
    out = [(x0, y0, x1, y1) for x0 in range(w) for x1 in range(x0, w)
           for y0 in range(h) for y1 in range(y0, h)]
    return np.array(out, dtype=np.int64).reshape(-1, 4)


def _deficient(dims, sub, T: Fraction, lo: bool) -> np.ndarray:
    # T <= d  (lo=True)  or  d <= 2T  (lo=False), exactly, on integer sides
    W, H = dims
    sw, sh = sub[:, 2] - sub[:, 0] + 1, sub[:, 3] - sub[:, 1] + 1
    num, den = T.numerator, T.denominator
    if lo:
        return ((W - sw) * den >= num * W) | ((H - sh) * den >= num * H)
    return ((W - sw) * den <= 2 * num * W) & ((H - sh) * den <= 2 * num * H)


@lru_cache(maxsize=None)
def _unary_local(w: int, h: int, T: Fraction) -> tuple[np.ndarray, np.ndarray]:
    """Local boxes ``v`` with ``d(v, u) <= 2T`` and a flag for ``d >= T``."""
    sub = _local_subrects(w, h)
    keep = _deficient((w, h), sub, T, lo=False)
    return sub[keep], _deficient((w, h), sub[keep], T, lo=True)


@lru_cache(maxsize=None)
def _binary_local(w: int, h: int, T: Fraction) -> np.ndarray:
    """Local ``(P, 8)`` canonical child pairs ``v < w`` for a binary node."""
    sub = _local_subrects(w, h)
    cand = sub[_deficient((w, h), sub, T, lo=True)]
    idx = K.merge_pairs(cand, w, h)
    return np.hstack([cand[idx[:, 0]], cand[idx[:, 1]]]) if len(idx) else np.zeros((0, 8), np.int64)


def _place(local, u: Rectangle) -> Rectangle:
    return Rectangle(int(local[0]) + u.x_min, int(local[1]) + u.y_min,
                     int(local[2]) + u.x_min, int(local[3]) + u.y_min)


def unary_children(u: Rectangle, params: GoodnessParams) -> Iterator[tuple[Rectangle, bool]]:
    """``(v, d >= T)`` for each admissible single child ``v`` (``d(v, u) <= 2T``)."""
    boxes, strict = _unary_local(u.width, u.height, params.T)
    for b, s in zip(boxes, strict):
        yield _place(b, u), bool(s)


def binary_children(u: Rectangle, params: GoodnessParams) -> Iterator[tuple[Rectangle, Rectangle]]:
    for row in _binary_local(u.width, u.height, params.T):
        yield _place(row[:4], u), _place(row[4:], u)


# -- enumeration ---------------------------------------------------------------------

class _Budget:
    def __init__(self, max_nodes):
        self.max_nodes = max_nodes
        self.truncated = False


def _gen(u: Rectangle, params: GoodnessParams, kinds: str, budget: int, state: _Budget):
    """Good sub-hierarchies rooted at ``u`` with root kind in ``kinds`` ('s', 'u', 'b')."""
    if budget < 1:
        state.truncated = True
        return
    if params.is_seed_rect(u):
        if "s" in kinds:
            yield Hierarchy(u), 1
        return
    if "u" in kinds:
        for v, strict in unary_children(u, params):
            sub_kinds = "sbu" if strict else "sb"
            for t, n in _gen(v, params, sub_kinds, budget - 1, state):
                yield Hierarchy(u, (t,)), n + 1
    if "b" in kinds:
        for v, w in binary_children(u, params):
            for tv, nv in _gen(v, params, "sbu", budget - 2, state):
                for tw, nw in _gen(w, params, "sbu", budget - 1 - nv, state):
                    yield Hierarchy(u, (tv, tw)), nv + nw + 1


def iter_good(R: Rectangle, params: GoodnessParams, max_nodes: Optional[int] = None,
              state: Optional[_Budget] = None) -> Iterator[Hierarchy]:
    """Stream every hierarchy for ``R`` good for ``params`` (each exactly once)."""
    state = state or _Budget(max_nodes)
    budget = max_nodes if max_nodes is not None else 10 ** 9
    for t, _ in _gen(R, params, "sbu", budget, state):
        yield t


@dataclass
class GoodEnumeration:
    hierarchies: list[Hierarchy] = field(repr=False)
    count: int
    complete: bool


def enumerate_good(R: Rectangle, params: GoodnessParams, max_count: int = 10 ** 6,
                   max_nodes: Optional[int] = None) -> GoodEnumeration:
    """Collect good hierarchies; ``complete`` is False if either cap cut the stream."""
    state = _Budget(max_nodes)
    out = []
    for t in iter_good(R, params, max_nodes, state):
        if len(out) == max_count:
            return GoodEnumeration(out, len(out), False)
        out.append(t)
    return GoodEnumeration(out, len(out), not state.truncated)


def _dims_order(R: Rectangle) -> list[tuple[int, int]]:
    return sorted(((w, h) for w in range(1, R.width + 1) for h in range(1, R.height + 1)),
                  key=lambda d: (d[0] * d[1], d))


def count_good(R: Rectangle, params: GoodnessParams) -> int:
    """Exact number of good hierarchies for ``R`` (dynamic programme on dims)."""
    seeds, unary, binary = {}, {}, {}
    for dims in _dims_order(R):
        u = Rectangle.from_dims(*dims)
        if params.is_seed_rect(u):
            seeds[dims], unary[dims], binary[dims] = 1, 0, 0
            continue
        seeds[dims] = 0
        tot = 0
        for row in _binary_local(*dims, params.T):
            a = (int(row[2] - row[0] + 1), int(row[3] - row[1] + 1))
            b = (int(row[6] - row[4] + 1), int(row[7] - row[5] + 1))
            tot += (seeds[a] + unary[a] + binary[a]) * (seeds[b] + unary[b] + binary[b])
        binary[dims] = tot
        tot = 0
        boxes, strict = _unary_local(*dims, params.T)
        for b, s in zip(boxes, strict):
            c = (int(b[2] - b[0] + 1), int(b[3] - b[1] + 1))
            tot += seeds[c] + binary[c] + (unary[c] if s else 0)
        unary[dims] = tot
    d = R.dims
    return seeds[d] + unary[d] + binary[d]


def max_height(R: Rectangle, params: GoodnessParams) -> int:
    """Largest height over all good hierarchies for ``R`` (-1 if there are none)."""
    NONE = -1
    hs, hu, hb = {}, {}, {}
    for dims in _dims_order(R):
        u = Rectangle.from_dims(*dims)
        if params.is_seed_rect(u):
            hs[dims], hu[dims], hb[dims] = 0, NONE, NONE
            continue
        hs[dims] = NONE
        best = NONE
        for row in _binary_local(*dims, params.T):
            a = (int(row[2] - row[0] + 1), int(row[3] - row[1] + 1))
            b = (int(row[6] - row[4] + 1), int(row[7] - row[5] + 1))
            ha, hb_ = max(hs[a], hu[a], hb[a]), max(hs[b], hu[b], hb[b])
            if ha > NONE and hb_ > NONE:
                best = max(best, 1 + max(ha, hb_))
        hb[dims] = best
        best = NONE
        boxes, strict = _unary_local(*dims, params.T)
        for b, s in zip(boxes, strict):
            c = (int(b[2] - b[0] + 1), int(b[3] - b[1] + 1))
            hc = max(hs[c], hb[c], hu[c] if s else NONE)
            if hc > NONE:
                best = max(best, 1 + hc)
        hu[dims] = best
    d = R.dims
    return max(hs[d], hu[d], hb[d])


# -- satisfaction --------------------------------------------------------------------

class _Certificates:
    """Minimal certificates of ``I(S)`` and ``D(S, R)`` as masks over the sites of ``A``."""

    def __init__(self, A: Configuration, cap: int = SATISFY_CAP):
        self.A = A
        self.sites = A.sites()
        if len(self.sites) > cap:
            raise ValueError(f"|A| = {len(self.sites)} exceeds the exact-search cap of {cap}")
        self.index = {s: i for i, s in enumerate(self.sites)}
        self._cache: dict = {}

    def _minimal(self, box: Rectangle, helper: Optional[Rectangle]) -> np.ndarray:
        key = (box, helper)
        if key in self._cache:
            return self._cache[key]
        inside = [s for s in self.sites if box.contains_site(*s)
                  and (helper is None or not helper.contains_site(*s))]
        cells = np.array([(x - box.x_min, y - box.y_min) for x, y in inside], np.int64).reshape(-1, 2)
        hgrid = np.zeros(box.dims, np.uint8)
        if helper is not None:
            hgrid[helper.local(box)] = 1
        table = K.span_table(box.width, box.height, hgrid, cells, K.STANDARD, 0, True)
        local = K.minimal_masks(table, len(inside))
        glob = np.zeros(local.shape, np.int64)
        for j, s in enumerate(inside):
            glob |= ((local >> j) & 1) << self.index[s]
        self._cache[key] = glob
        return glob

    def spanned(self, S: Rectangle) -> np.ndarray:
        return self._minimal(S, None)

    def helped(self, S: Rectangle, R: Rectangle) -> np.ndarray:
        return self._minimal(R, S)


def _events(H: Hierarchy):
    for _, u in H.nodes():
        if not u.children:
            yield ("I", u.rect)
        elif len(u.children) == 1:
            yield ("D", u.children[0].rect, u.rect)


def satisfaction_witness(H: Hierarchy, A: Configuration, cap: int = SATISFY_CAP):
    """Pairwise-disjoint certificates, one per event of ``H``, or ``None``.

    Returns a list of ``(event, sites)``.  ``A`` is first restricted to the
    root rectangle; at most ``cap`` occupied sites are allowed.
    """
    if not A.bounds.contains(H.rect):
        raise ValueError(f"{H.rect} is not inside {A.bounds}")
    A = A.restrict(H.rect)
    certs = _Certificates(A, cap)
    events = list(_events(H))
    options = [certs.spanned(e[1]) if e[0] == "I" else certs.helped(e[1], e[2]) for e in events]
    if any(len(o) == 0 for o in options):
        return None
    order = sorted(range(len(events)), key=lambda i: len(options[i]))
    chosen = [0] * len(events)

    def search(k: int, used: int) -> bool:
        if k == len(order):
            return True
        i = order[k]
        for c in options[i]:
            c = int(c)
            if c & used == 0:
                chosen[i] = c
                if search(k + 1, used | c):
                    return True
        return False

    if not search(0, 0):
        return None
    return [(e, [certs.sites[b] for b in range(len(certs.sites)) if (c >> b) & 1])
            for e, c in zip(events, chosen)]


def is_satisfied(H: Hierarchy, A: Configuration, cap: int = SATISFY_CAP) -> bool:
    """The events (e) and (f) of ``H`` occur disjointly in ``A`` (exact search)."""
    return satisfaction_witness(H, A, cap) is not None


# -- existence search --------------------------------------------------------------------

def build_hierarchy(A: Configuration, R: Rectangle, params: GoodnessParams,
                    cap: int = SATISFY_CAP) -> Optional[Hierarchy]:
    """A hierarchy for ``R`` good for ``params`` and satisfied by ``A``, or ``None``.

    Depth-first search over good hierarchies that carries the union of the
    certificates chosen so far, so every returned tree comes with disjoint
    witnesses.  The search is complete: ``None`` means no such hierarchy exists.
    """
    from .dynamics import internally_spans

    if not internally_spans(A, R):
        raise ValueError(f"A does not internally span {R}")
    A = A.restrict(R)
    certs = _Certificates(A, cap)
    spans = {}

    def spanned(S):
        if S not in spans:
            spans[S] = internally_spans(A, S)
        return spans[S]

    def gen(u: Rectangle, kinds: str, used: int):
        if params.is_seed_rect(u):
            if "s" in kinds:
                for c in certs.spanned(u):
                    c = int(c)
                    if c & used == 0:
                        yield Hierarchy(u), used | c
            return
        if "b" in kinds:
            for v, w in binary_children(u, params):
                if not (spanned(v) and spanned(w)):
                    continue
                for tv, used_v in gen(v, "sbu", used):
                    for tw, used_w in gen(w, "sbu", used_v):
                        yield Hierarchy(u, (tv, tw)), used_w
        if "u" in kinds:
            for v, strict in unary_children(u, params):
                if not spanned(v):
                    continue
                for c in certs.helped(v, u):
                    c = int(c)
                    if c & used:
                        continue
                    for t, used_t in gen(v, "sbu" if strict else "sb", used | c):
                        yield Hierarchy(u, (t,)), used_t

    for t, _ in gen(R, "sbu", 0):
        return t
    return None


# -- pods --------------------------------------------------------------------------

class Pod(NamedTuple):
    dims: tuple[int, int]
    unary_cost: float       # sum of U(R_w, R_v) over unary steps
    rhs: float              # U(S, R) - 2 q M g(Z q)


def pod_search(H: Hierarchy, q: float, params: GoodnessParams, grid_steps: int = 512,
               rtol: float = 1e-9) -> Optional[Pod]:
    """Dims ``S <= sum of seed dims`` (inside ``R``) with the unary cost at least ``U(S,R) - 2qMg(Zq)``.

    Candidates are scanned from the largest area down; ``rtol`` absorbs the
    rounding of the path functional between equal-in-exact-arithmetic quantities.
    """
    R = H.rect
    cost = sum(u_func(v.dims, u.dims, q, grid_steps) for v, u in H.unary_pairs())
    M = sum(1 for _, u in H.nodes() if len(u.children) == 2)
    slack = 2 * q * M * g(float(params.Z) * q)
    seeds = H.seeds()
    cap1 = min(R.width, sum(s.width for s in seeds))
    cap2 = min(R.height, sum(s.height for s in seeds))
    cands = sorted(((a, b) for a in range(1, cap1 + 1) for b in range(1, cap2 + 1)),
                   key=lambda d: (-d[0] * d[1], d))
    for dims in cands:
        rhs = u_func(dims, R.dims, q, grid_steps) - slack
        if cost >= rhs - rtol * max(1.0, abs(rhs)):
            return Pod(dims, cost, rhs)
    return None


# -- the sum over hierarchies --------------------------------------------------------------

@dataclass(frozen=True)
class BasicBound:
    value: float
    hierarchies: int
    seed_mode: str
    certifying: bool
    notes: tuple[str, ...] = ()

    def __float__(self):
        return self.value


def _seed_term(dims, p: float, mode: str, notes: set) -> float:
    if mode == "exact":
        if dims[0] * dims[1] <= 24:
            return exact_spanning_probability(dims, p)
        notes.add("seed area above 24: seeds bound used")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        return seeds_bound(dims, q_of_p(p)).value


def _helper_term(v_local: Rectangle, u_dims, p: float, mode: str, notes: set) -> float:
    u = Rectangle.from_dims(*u_dims)
    free = u.area - v_local.area
    if mode == "exact" and free <= EXACT_D_CELLS:
        return exact_helper_probability(v_local, u, p)
    if mode == "exact":
        notes.add(f"helper step with more than {EXACT_D_CELLS} free cells: helper bound used")
    return min(1.0, d_bound(v_local.dims, u_dims, q_of_p(p)).value)


def hierarchy_weight(H: Hierarchy, p: float, seed_mode: str = "exact") -> float:
    """``prod P(D(R_v, R_u)) prod P(I(R_u))`` for one hierarchy."""
    notes: set = set()
    w = 1.0
    for v, u in H.unary_pairs():
        w *= _helper_term(v.translate(1 - u.x_min, 1 - u.y_min), u.dims, p, seed_mode, notes)
    for s in H.seeds():
        w *= _seed_term(s.dims, p, seed_mode, notes)
    return w


def basic_upper_bound(R: Rectangle, params: GoodnessParams, p: float,
                      seed_prob_mode: str = "exact") -> BasicBound:
    """Sum over good hierarchies of the product of event probabilities.

    Evaluated as a sum-product over dims (every term depends on a subtree only
    through its root box up to translation), so it covers the full collection
    of good hierarchies and is a certified upper bound on the probability that
    ``R`` is internally spanned.  ``seed_prob_mode="bound"`` replaces exact
    seed and helper probabilities by their analytic bounds.
    """
    if seed_prob_mode not in ("exact", "bound"):
        raise ValueError(f"unknown seed_prob_mode {seed_prob_mode!r}")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    notes: set = set()
    ws, wu, wb = {}, {}, {}
    for dims in _dims_order(R):
        u = Rectangle.from_dims(*dims)
        if params.is_seed_rect(u):
            ws[dims], wu[dims], wb[dims] = _seed_term(dims, p, seed_prob_mode, notes), 0.0, 0.0
            continue
        ws[dims] = 0.0
        tot = 0.0
        for row in _binary_local(*dims, params.T):
            a = (int(row[2] - row[0] + 1), int(row[3] - row[1] + 1))
            b = (int(row[6] - row[4] + 1), int(row[7] - row[5] + 1))
            tot += (ws[a] + wu[a] + wb[a]) * (ws[b] + wu[b] + wb[b])
        wb[dims] = tot
        tot = 0.0
        boxes, strict = _unary_local(*dims, params.T)
        for b, s in zip(boxes, strict):
            v = _place(b, u)
            c = v.dims
            sub = ws[c] + wb[c] + (wu[c] if s else 0.0)
            if sub:
                tot += _helper_term(v, dims, p, seed_prob_mode, notes) * sub
        wu[dims] = tot
    d = R.dims
    return BasicBound(ws[d] + wu[d] + wb[d], count_good(R, params), seed_prob_mode, True,
                      tuple(sorted(notes)))


def basic_upper_bound_enumerated(R: Rectangle, params: GoodnessParams, p: float,
                                 seed_prob_mode: str = "exact", max_count: int = 10 ** 6) -> BasicBound:
    """Same sum by explicit enumeration; non-certifying if the enumeration was capped."""
    en = enumerate_good(R, params, max_count=max_count)
    total = sum(hierarchy_weight(H, p, seed_prob_mode) for H in en.hierarchies)
    notes = () if en.complete else ("enumeration capped: partial sum is not a bound",)
    return BasicBound(total, en.count, seed_prob_mode, en.complete, notes)


__all__ = [
    "Hierarchy", "Violation", "GoodnessParams", "HierarchyStats", "GoodEnumeration", "Pod",
    "BasicBound", "seed", "merges_to", "validate", "goodness_violations", "is_good", "stats",
    "stats_violations", "height_bound", "large_seed_property", "unary_children", "binary_children",
    "iter_good", "enumerate_good", "count_good", "max_height", "satisfaction_witness", "is_satisfied",
    "build_hierarchy", "pod_search", "hierarchy_weight", "basic_upper_bound",
    "basic_upper_bound_enumerated", "helper_span_counts",
]
