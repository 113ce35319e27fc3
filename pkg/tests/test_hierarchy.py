import itertools
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from perclab import _kernels as K
from perclab import hierarchy as hi
from perclab import oracle as orc
from perclab.analytic import g, u_func
from perclab.dynamics import closure_grid, internally_spans
from perclab.hierarchy import GoodnessParams, Hierarchy
from perclab.lattice import Configuration, Rectangle, deficiency

P_SMALL = GoodnessParams(0.3, 2)


def R_(w, h):
    return Rectangle.from_dims(w, h)


# -- structure and goodness ------------------------------------------------------------

def test_single_node_valid():
    assert hi.validate(Hierarchy(R_(3, 3)), R_(3, 3)) == []
    assert [v.condition for v in hi.validate(Hierarchy(R_(3, 3)), R_(3, 4))] == ["a"]


def test_far_apart_children_violate_closure():
    u = R_(6, 2)
    H = Hierarchy(u, (Hierarchy(Rectangle(1, 1, 1, 1)), Hierarchy(Rectangle(6, 2, 6, 2))))
    bad = hi.validate(H)
    assert [(v.node, v.condition) for v in bad] == [((), "d")]


def test_not_nested_child():
    H = Hierarchy(R_(2, 2), (Hierarchy(Rectangle(1, 1, 3, 1)),))
    assert [v.condition for v in hi.validate(H)] == ["c"]
    with pytest.raises(ValueError):
        hi.is_good(H, P_SMALL)


def test_too_many_children():
    kids = tuple(Hierarchy(Rectangle(i, 1, i, 1)) for i in (1, 2, 3))
    assert [v.condition for v in hi.validate(Hierarchy(R_(3, 1), kids))] == ["b"]


def test_canonical_child_order():
    a, b = Hierarchy(Rectangle(1, 1, 2, 2)), Hierarchy(Rectangle(1, 3, 2, 4))
    assert Hierarchy(R_(2, 4), (a, b)) == Hierarchy(R_(2, 4), (b, a))


def test_seed_goodness():
    P = GoodnessParams(0.25, 3)
    assert hi.is_good(Hierarchy(R_(3, 3)), P)
    bad = hi.goodness_violations(Hierarchy(R_(4, 4)), P)
    assert [v.condition for v in bad] == ["j"]


def test_unary_step_too_large():
    # d = 3T with a seed child breaks the single-step cap
    P = GoodnessParams(Fraction(1, 10), 7)
    u = R_(10, 10)
    v = Rectangle(1, 1, 10, 7)
    assert deficiency(v, u).d == 3 * P.T
    H = Hierarchy(u, (Hierarchy(v),))
    assert [(x.node, x.condition) for x in hi.goodness_violations(H, P)] == [((), "h")]


def test_chain_step_window():
    P = GoodnessParams(Fraction(1, 4), 2)
    leaf = Hierarchy(Rectangle(1, 1, 2, 2))
    mid = Hierarchy(Rectangle(1, 1, 3, 3), (leaf,))
    ok = Hierarchy(R_(4, 4), (mid,))       # d = 1/4 between two unary nodes
    assert hi.is_good(ok, P)
    small = Hierarchy(R_(4, 4), (Hierarchy(Rectangle(1, 1, 4, 3), (leaf,)),))
    conds = {(v.node, v.condition) for v in hi.goodness_violations(small, P)}
    assert ((0,), "h") not in conds
    assert hi.is_good(small, P)
    bad = Hierarchy(R_(8, 8), (Hierarchy(Rectangle(1, 1, 7, 8), (Hierarchy(Rectangle(1, 1, 2, 2)),)),))
    assert ((), "g") in {(v.node, v.condition) for v in hi.goodness_violations(bad, P)}


def test_binary_child_deficiency():
    P = GoodnessParams(Fraction(1, 2), 2)
    # children of 4x2 that are 3x2 have d = 1/4 < 1/2
    H = Hierarchy(R_(4, 2), (Hierarchy(Rectangle(1, 1, 3, 2)), Hierarchy(Rectangle(2, 1, 4, 2))))
    assert hi.validate(H) == []
    assert {v.condition for v in hi.goodness_violations(H, P)} == {"i", "j"}


def test_params_exact():
    P = GoodnessParams(0.3, 2)
    assert P.T == Fraction(3, 10)
    with pytest.raises(ValueError):
        GoodnessParams(1.0, 2)
    with pytest.raises(ValueError):
        GoodnessParams(0.5, 1)


def test_dict_roundtrip():
    H = next(iter(hi.iter_good(R_(4, 4), P_SMALL)))
    assert Hierarchy.from_dict(H.to_dict()) == H


# -- statistics ----------------------------------------------------------------------

def test_single_node_stats():
    s = hi.stats(Hierarchy(R_(2, 3)), GoodnessParams(0.3, 3))
    assert (s.N, s.M, s.h, s.X) == (1, 0, 0, 5)
    assert s.m == 1


def test_height_bound_value():
    P = GoodnessParams(0.5, 6)
    assert hi.height_bound(R_(12, 12), P) == pytest.approx(16 * math.log(4) + 1, rel=1e-14)
    assert 23 < hi.height_bound(R_(12, 12), P) < 23.2


def test_height_bound_12x12():
    P = GoodnessParams(0.5, 6)
    R = R_(12, 12)
    assert hi.max_height(R, P) <= 23
    # a streamed sample of the 1.5M trees
    for H in itertools.islice(hi.iter_good(R, P), 20000):
        assert H.height <= hi.height_bound(R, P)


@pytest.mark.parametrize("dims,T,Z", [((4, 4), 0.3, 2), ((4, 3), 0.3, 2), ((7, 7), 0.25, 6),
                                      ((8, 7), 0.25, 6), ((5, 4), 0.45, 3)])
def test_enumerated_stats_invariants(dims, T, Z):
    P = GoodnessParams(T, Z)
    R = R_(*dims)
    en = hi.enumerate_good(R, P, max_count=200_000)
    assert en.complete
    for H in en.hierarchies:
        assert hi.validate(H, R) == []
        assert hi.is_good(H, P)
        assert hi.stats_violations(H, P) == []
        s = hi.stats(H, P)
        assert 1 <= s.N and s.M <= s.N
        assert 3 * s.X >= s.m * P.Z
        if 4 * P.T <= 1 and P.Z >= 6:
            assert hi.large_seed_property(H, P)


# -- enumeration against an independent counter -------------------------------------------

def _subrects(u):
    return [Rectangle(x0, y0, x1, y1)
            for x0 in range(u.x_min, u.x_max + 1) for x1 in range(x0, u.x_max + 1)
            for y0 in range(u.y_min, u.y_max + 1) for y1 in range(y0, u.y_max + 1)]


def _closes(v, w, u):
    grid = np.zeros(u.dims, dtype=bool)
    grid[v.local(u)] = True
    grid[w.local(u)] = True
    return closure_grid(grid).all()


def reference_count(R, T, Z):
    """Direct recursion on placed rectangles with the goodness conditions spelled out."""
    T, Z = Fraction(str(T)), Fraction(str(Z))

    @lru_cache(maxsize=None)
    def count(u, kind):
        # kind: number of good trees rooted at u whose root is a seed / unary / binary
        if u.sh <= Z:
            return 1 if kind == "s" else 0
        if kind == "s":
            return 0
        total = 0
        if kind == "u":
            # containment is not strict: v = u (d = 0) is a legal step above a non-unary v
            for v in _subrects(u):
                d = deficiency(v, u).d
                if d > 2 * T:
                    continue
                total += count(v, "s") + count(v, "b")
                if d >= T:
                    total += count(v, "u")
            return total
        kids = [v for v in _subrects(u) if deficiency(v, u).d >= T]
        for v, w in itertools.combinations(kids, 2):
            if _closes(v, w, u):
                total += sum(count(v, k) for k in "sub") * sum(count(w, k) for k in "sub")
        return total

    return sum(count(R, k) for k in "sub")


def test_reference_count_3x3():
    assert hi.count_good(R_(3, 3), P_SMALL) == 278
    assert reference_count(R_(3, 3), 0.3, 2) == 278
    en = hi.enumerate_good(R_(3, 3), P_SMALL)
    assert en.count == 278 and en.complete
    assert len(set(en.hierarchies)) == 278


@pytest.mark.parametrize("dims,T,Z", [((4, 3), 0.3, 2), ((4, 4), 0.3, 2), ((4, 4), 0.4, 3),
                                      ((4, 3), 0.25, 2), ((5, 3), 0.2, 3), ((3, 3), 0.1, 2)])
def test_count_matches_reference(dims, T, Z):
    assert hi.count_good(R_(*dims), GoodnessParams(T, Z)) == reference_count(R_(*dims), T, Z)


def test_enumeration_matches_count():
    P = P_SMALL
    en = hi.enumerate_good(R_(4, 4), P)
    assert en.count == hi.count_good(R_(4, 4), P) == 1969
    assert len(set(en.hierarchies)) == en.count


def test_seed_root_count():
    en = hi.enumerate_good(R_(2, 5), GoodnessParams(0.3, 2))
    assert en.count == 1 and en.hierarchies[0] == Hierarchy(R_(2, 5))


def test_enumeration_caps():
    en = hi.enumerate_good(R_(4, 4), P_SMALL, max_count=100)
    assert en.count == 100 and not en.complete
    en = hi.enumerate_good(R_(4, 4), P_SMALL, max_nodes=2)
    assert not en.complete


def test_counts_grow_as_T_drops():
    for dims, Z in [((3, 3), 2), ((4, 3), 2), ((4, 4), 2), ((5, 4), 3), ((5, 5), 3)]:
        counts = [hi.count_good(R_(*dims), GoodnessParams(T, Z)) for T in (0.45, 0.25)]
        assert counts[1] > counts[0]


def test_counts_not_monotone_in_T():
    # lowering T also tightens the d <= 2T caps, so fine steps can lose trees
    assert hi.count_good(R_(3, 3), GoodnessParams(0.2, 2)) == 278
    assert hi.count_good(R_(3, 3), GoodnessParams(0.1, 2)) == 270
    assert hi.count_good(R_(4, 4), GoodnessParams(0.4, 3)) == 661
    assert hi.count_good(R_(4, 4), GoodnessParams(0.3, 3)) == 597


@pytest.mark.parametrize("w,h", [(1, 3), (2, 2), (2, 3), (3, 3), (3, 4), (4, 4)])
def test_merge_pairs_against_closure(w, h):
    u = R_(w, h)
    rects = _subrects(u)
    local = np.array([(r.x_min - 1, r.y_min - 1, r.x_max - 1, r.y_max - 1) for r in rects], np.int64)
    got = {tuple(p) for p in K.merge_pairs(local, w, h)}
    want = {(i, j) for i, j in itertools.combinations(range(len(rects)), 2)
            if _closes(rects[i], rects[j], u)}
    assert got == want


# -- satisfaction and construction ------------------------------------------------------

def test_single_seed_satisfaction():
    R = R_(3, 3)
    H = Hierarchy(R)
    rng = np.random.default_rng(5)
    for _ in range(40):
        A = Configuration(R, rng.random((3, 3)) < 0.4)
        assert hi.is_satisfied(H, A) == internally_spans(A, R)


def test_disjoint_seeds_satisfaction():
    R = R_(2, 4)
    a, b = Rectangle(1, 1, 2, 2), Rectangle(1, 3, 2, 4)
    H = Hierarchy(R, (Hierarchy(a), Hierarchy(b)))
    assert hi.validate(H) == []
    rng = np.random.default_rng(9)
    for _ in range(60):
        A = Configuration(R, rng.random((2, 4)) < 0.5)
        assert hi.is_satisfied(H, A) == (internally_spans(A, a) and internally_spans(A, b))


def test_witness_collision():
    # both strips are spanned, but only through the shared middle site
    R = R_(3, 1)
    a, b = Rectangle(1, 1, 2, 1), Rectangle(2, 1, 3, 1)
    H = Hierarchy(R, (Hierarchy(a), Hierarchy(b)))
    assert hi.validate(H) == []
    A = Configuration.full(R)
    assert internally_spans(A, a) and internally_spans(A, b)
    assert not hi.is_satisfied(H, A)


def test_witness_is_disjoint():
    R = R_(4, 4)
    A = Configuration.from_sites(R, [(1, 1), (2, 2), (3, 3), (4, 4), (1, 4)])
    H = hi.build_hierarchy(A, R, P_SMALL)
    wit = hi.satisfaction_witness(H, A)
    sites = [s for _, ss in wit for s in ss]
    assert len(sites) == len(set(sites))
    assert set(sites) <= set(A.sites())


def test_satisfaction_cap():
    R = R_(5, 5)
    with pytest.raises(ValueError):
        hi.is_satisfied(Hierarchy(R), Configuration.full(R))


def test_build_seed_base_case():
    P = GoodnessParams(0.25, 2)
    s = orc.enumerate_spanning((2, 2))
    cells = list(R_(2, 2).sites())
    for m in s.spanning_masks():
        if bin(int(m)).count("1") != 2:
            continue
        # bit i of the table is the local cell (i // 2, i % 2); sites() is x-major too
        A = Configuration.from_sites(R_(2, 2), [cells[i] for i in range(4) if (int(m) >> i) & 1])
        assert hi.build_hierarchy(A, R_(2, 2), P) == Hierarchy(R_(2, 2))


def test_build_on_sampled_spanning_sets():
    R = R_(4, 4)
    s = orc.enumerate_spanning((4, 4))
    masks = s.spanning_masks()
    rng = np.random.default_rng(20241014)
    cells = list(R.sites())
    for m in rng.choice(masks, size=500, replace=False):
        A = Configuration.from_sites(R, [cells[i] for i in range(16) if (int(m) >> i) & 1])
        H = hi.build_hierarchy(A, R, P_SMALL)
        assert H is not None
        assert hi.validate(H, R) == []
        assert hi.is_good(H, P_SMALL)
        assert hi.is_satisfied(H, A)


def test_build_requires_spanning():
    R = R_(3, 3)
    with pytest.raises(ValueError):
        hi.build_hierarchy(Configuration.from_sites(R, [(1, 1)]), R, P_SMALL)


# -- pods -------------------------------------------------------------------------

def test_pod_single_seed():
    pod = hi.pod_search(Hierarchy(R_(2, 3)), 0.1, P_SMALL)
    assert pod is not None and pod.dims == (2, 3)
    assert pod.unary_cost == 0.0


def test_pod_two_level_chain():
    # one unary step and no binary node: S = R_child meets the inequality with equality
    q, P = 0.1, GoodnessParams(0.5, 2)
    u, v = R_(4, 4), Rectangle(1, 1, 2, 2)
    H = Hierarchy(u, (Hierarchy(v),))
    assert hi.is_good(H, P)
    cost = u_func(v.dims, u.dims, q)
    pod = hi.pod_search(H, q, P)
    assert pod is not None
    assert pod.unary_cost == pytest.approx(cost, rel=1e-12)
    assert pod.unary_cost >= pod.rhs - 1e-9
    assert pod.dims[0] * pod.dims[1] >= v.area
    assert cost >= u_func(v.dims, u.dims, q) - 2 * q * 0 * g(float(P.Z) * q)


def test_pod_longer_chain():
    q = 0.1
    u = R_(4, 4)
    H = Hierarchy(u, (Hierarchy(Rectangle(1, 1, 4, 3), (Hierarchy(Rectangle(1, 1, 2, 2)),)),))
    pod = hi.pod_search(H, q, GoodnessParams(0.25, 2))
    assert pod is not None
    assert pod.unary_cost >= pod.rhs - 1e-9


def test_pods_for_all_4x4():
    en = hi.enumerate_good(R_(4, 4), P_SMALL)
    for H in en.hierarchies:
        pod = hi.pod_search(H, 0.1, P_SMALL)
        assert pod is not None
        seeds = H.seeds()
        assert pod.dims[0] <= sum(s.width for s in seeds)
        assert pod.dims[1] <= sum(s.height for s in seeds)


# -- the sum over hierarchies ----------------------------------------------------------------

def test_basic_bound_seed_root():
    b = hi.basic_upper_bound(R_(2, 4), P_SMALL, 0.15)
    assert b.value == pytest.approx(orc.exact_spanning_probability((2, 4), 0.15), rel=1e-14)
    assert b.hierarchies == 1 and b.certifying


@pytest.mark.parametrize("p", [0.05, 0.1, 0.2, 0.4])
def test_basic_bound_3x3(p):
    b = hi.basic_upper_bound(R_(3, 3), P_SMALL, p)
    assert b.value >= orc.exact_spanning_probability((3, 3), p)
    e = hi.basic_upper_bound_enumerated(R_(3, 3), P_SMALL, p)
    assert e.value == pytest.approx(b.value, rel=1e-10)
    assert e.certifying and e.hierarchies == 278


@pytest.mark.parametrize("dims,T,Z", [((4, 4), 0.3, 2), ((4, 3), 0.25, 2), ((5, 4), 0.45, 3)])
def test_basic_bound_dominates(dims, T, Z):
    P = GoodnessParams(T, Z)
    for p in (0.02, 0.1, 0.3):
        b = hi.basic_upper_bound(R_(*dims), P, p)
        assert b.value >= orc.exact_spanning_probability(dims, p) * (1 - 1e-12)


def test_basic_bound_dp_equals_enumeration_4x4():
    b = hi.basic_upper_bound(R_(4, 4), P_SMALL, 0.1)
    e = hi.basic_upper_bound_enumerated(R_(4, 4), P_SMALL, 0.1)
    assert e.value == pytest.approx(b.value, rel=1e-10)


def test_basic_bound_mode_chain():
    R, p = R_(4, 3), 0.1
    bound = hi.basic_upper_bound(R, P_SMALL, p, "bound").value
    exact = hi.basic_upper_bound(R, P_SMALL, p, "exact").value
    assert bound >= exact >= orc.exact_spanning_probability((4, 3), p)


def test_capped_sum_not_certifying():
    e = hi.basic_upper_bound_enumerated(R_(4, 4), P_SMALL, 0.1, max_count=10)
    assert not e.certifying and e.notes


def test_basic_bound_rejects_bad_input():
    with pytest.raises(ValueError):
        hi.basic_upper_bound(R_(3, 3), P_SMALL, 0.1, "guess")
    with pytest.raises(ValueError):
        hi.basic_upper_bound(R_(3, 3), P_SMALL, 0.0)
