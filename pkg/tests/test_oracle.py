import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perclab import analytic as an
from perclab import oracle as orc
from perclab.dynamics import FROBOSE, STANDARD, UpdateRule, closure_grid, percolates
from perclab.lattice import Configuration, Rectangle


def _mask_grid(mask, w, h):
    grid = np.zeros((w, h), dtype=bool)
    for i in range(w * h):
        if (mask >> i) & 1:
            grid[i // h, i % h] = True
    return grid


# -- enumeration examples -------------------------------------------------------------

def test_standard_2x2():
    s = orc.enumerate_spanning((2, 2))
    assert s.min_size == 2
    assert s.counts == [0, 0, 2, 4, 1]
    assert s.minimal_counts[2] == 2 and sum(s.minimal_counts) == 2
    # the two minimal sets are the diagonals
    diag = {tuple(map(tuple, np.argwhere(_mask_grid(int(m), 2, 2)))) for m in s.minimal_masks()}
    assert diag == {((0, 0), (1, 1)), ((0, 1), (1, 0))}


def test_standard_3x3():
    s = orc.enumerate_spanning((3, 3))
    assert s.min_size == 3
    assert s.counts == [0, 0, 0, 14, 70, 102, 80, 36, 9, 1]
    assert s.minimal_counts[:5] == [0, 0, 0, 14, 9]


def test_frobose_2x3():
    s = orc.enumerate_spanning((2, 3), FROBOSE)
    assert s.min_size == 2 + 3 - 1
    assert s.counts == [0, 0, 0, 0, 12, 6, 1]


def test_cap_refused():
    with pytest.raises(orc.CapExceeded):
        orc.enumerate_spanning((5, 5))
    with pytest.raises(orc.CapExceeded):
        orc.exact_spanning_probability((5, 5), 0.1)
    assert orc.enumerate_spanning((5, 5), cap=25, method="pruned").min_size == 5


@pytest.mark.parametrize("dims", [(1, 1), (1, 4), (2, 3), (3, 2), (2, 5), (3, 4), (2, 6)])
def test_counts_against_direct_closure(dims):
    # independent route: closure of every subset by the generic dynamics
    w, h = dims
    s = orc.enumerate_spanning(dims)
    counts = [0] * (w * h + 1)
    for mask in range(1 << (w * h)):
        if closure_grid(_mask_grid(mask, w, h)).all():
            counts[bin(mask).count("1")] += 1
    assert s.counts == counts
    assert s.total_spanning <= 2 ** (w * h)


@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4), (2, 7), (4, 5)])
def test_standard_min_size_half_perimeter(dims):
    s = orc.enumerate_spanning(dims)
    phi = dims[0] + dims[1]
    assert s.min_size >= math.ceil(phi / 2)
    pc = orc.popcounts(dims[0] * dims[1])
    assert pc[s.spanning_masks()].min() >= phi / 2
    if dims[0] == dims[1]:
        assert s.min_size == dims[0]


def _rows_columns_connected(grid):
    w, h = grid.shape
    # union-find over w column nodes and h row nodes
    parent = list(range(w + h))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for x, y in np.argwhere(grid):
        parent[find(x)] = find(w + y)
    return len({find(i) for i in range(w + h)}) == 1


@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 2), (3, 3), (2, 4), (3, 4)])
def test_frobose_spanning_sets(dims):
    w, h = dims
    s = orc.enumerate_spanning(dims, FROBOSE)
    assert s.min_size == w + h - 1
    for mask in s.spanning_masks():
        grid = _mask_grid(int(mask), w, h)
        assert grid.sum() >= w + h - 1
        assert _rows_columns_connected(grid)


@pytest.mark.parametrize("threads", [1, 3])
@pytest.mark.parametrize("rule", ["standard", "modified", "frobose", "kcross:3"])
def test_pruned_equals_naive(rule, threads):
    a = orc.enumerate_spanning((3, 4), rule)
    b = orc.enumerate_spanning((3, 4), rule, method="naive", threads=threads)
    assert a.counts == b.counts
    assert a.minimal_counts == b.minimal_counts
    assert np.array_equal(a.table, b.table)


def test_kcross_small_k():
    # the empty cross never infects; k = 2 is the standard rule
    one = orc.enumerate_spanning((3, 3), UpdateRule("kcross", 1))
    assert one.counts == [0] * 9 + [1]
    assert orc.enumerate_spanning((3, 4), "kcross:2").counts == orc.enumerate_spanning((3, 4)).counts


def test_kcross_measured_minima():
    # reported, not matched to a formula; larger k never spans with fewer sites
    mins = {k: orc.enumerate_spanning((4, 4), f"kcross:{k}").min_size for k in (2, 3, 4)}
    assert mins[2] == 4
    assert mins[2] <= mins[3] <= mins[4] <= 16


# -- spanning probabilities -------------------------------------------------------------

def test_spanning_probability_trivial():
    assert orc.exact_spanning_probability((1, 1), 0.37) == pytest.approx(0.37, rel=1e-15)
    for dims in [(1, 1), (2, 3), (4, 4)]:
        assert orc.exact_spanning_probability(dims, 1.0) == 1.0
        assert orc.exact_spanning_probability(dims, 0.0) == 0.0
    with pytest.raises(ValueError):
        orc.exact_spanning_probability((2, 2), 1.5)


def test_spanning_probability_2x2_monte_carlo():
    exact = orc.exact_spanning_probability((2, 2), 0.5)
    assert exact == pytest.approx(7 / 16, rel=1e-15)
    rng = np.random.default_rng(20241014)
    trials = 10 ** 6
    bits = rng.random((trials, 4)) < 0.5
    masks = bits @ (1 << np.arange(4))
    spans = np.array([percolates(Configuration(Rectangle.from_dims(2, 2), _mask_grid(m, 2, 2)))
                      for m in range(16)])
    hat = spans[masks].mean()
    sigma = math.sqrt(exact * (1 - exact) / trials)
    assert abs(hat - exact) < 3 * sigma


@pytest.mark.parametrize("dims", [(2, 2), (3, 3), (2, 5), (4, 4)])
def test_spanning_probability_monotone(dims):
    ps = np.linspace(0, 1, 41)
    vals = [orc.exact_spanning_probability(dims, p) for p in ps]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("dims", [(1, 1), (1, 3), (2, 2), (2, 4), (3, 3), (3, 5), (4, 4)])
def test_seeds_bound_dominates(dims):
    for p in [1e-4, 1e-3, 0.002]:
        q = an.q_of_p(p)
        rep = an.seeds_bound(dims, q)
        assert rep.in_regime
        assert rep.dominates(orc.exact_spanning_probability(dims, p))


def test_helper_counts():
    R = Rectangle.from_dims(3, 3)
    S = Rectangle(1, 1, 2, 2)
    counts = orc.helper_span_counts(S, R)
    # against direct closure of A with the seed box filled in
    free = [c for c in R.sites() if not S.contains_site(*c)]
    direct = [0] * (len(free) + 1)
    for r in range(len(free) + 1):
        for sub in itertools.combinations(free, r):
            A = Configuration.from_sites(R, list(sub)).with_box(S)
            if closure_grid(A.grid.astype(bool)).all():
                direct[r] += 1
    assert list(counts) == direct
    # translation invariance
    assert orc.helper_span_counts(S.translate(5, -2), R.translate(5, -2)) == counts
    with pytest.raises(ValueError):
        orc.helper_span_counts(Rectangle(1, 1, 4, 4), R)


def test_helper_probability_full_seed():
    R = Rectangle.from_dims(3, 2)
    assert orc.exact_helper_probability(R, R, 0.2) == 1.0


# -- crossing -------------------------------------------------------------------------

@given(st.integers(1, 8), st.floats(0.0, 1.0))
def test_crossing_one_column(b, p):
    assert orc.exact_crossing_probability(1, b, p) == pytest.approx(1 - (1 - p) ** b, abs=1e-15)


def test_crossing_4x3_bruteforce():
    tm = orc.exact_crossing_probability(4, 3, 0.2)
    assert abs(tm - orc.exact_crossing_probability_bruteforce(4, 3, 0.2)) < 1e-12
    assert abs(tm - orc.crossing_bruteforce_generative(4, 3, 0.2)) < 1e-12


@pytest.mark.parametrize("a,b", [(a, b) for a in range(1, 6) for b in range(1, 4) if a * b <= 16])
def test_crossing_matches_bruteforce(a, b):
    for p in (0.05, 0.3, 0.7):
        assert abs(orc.exact_crossing_probability(a, b, p)
                   - orc.exact_crossing_probability_bruteforce(a, b, p)) < 1e-12


@pytest.mark.parametrize("a", range(1, 7))
@pytest.mark.parametrize("b", range(1, 5))
def test_crossing_bound_dominates(a, b):
    for p in (1e-3, 0.01, 0.1, 0.4):
        val = orc.exact_crossing_probability(a, b, p)
        assert an.crossing_bound(a, b, an.q_of_p(p)).dominates(val * (1 - 1e-12))


def test_crossing_rejects_bad_sizes():
    with pytest.raises(ValueError):
        orc.exact_crossing_probability(0, 3, 0.1)


# -- disjoint occurrence ---------------------------------------------------------------

def test_bk_same_site():
    U = Rectangle.from_dims(2, 2)
    r = orc.bk_disjoint_check(U, orc.SiteOccupied((1, 1)), orc.SiteOccupied((1, 1)), 0.4)
    assert r.lhs == 0.0
    assert r.rhs == pytest.approx(0.16, rel=1e-14)
    assert r.holds


def test_bk_independent_columns():
    U = Rectangle.from_dims(2, 2)
    B = orc.AnyOccupied(Rectangle(1, 1, 1, 2))
    C = orc.AnyOccupied(Rectangle(2, 1, 2, 2))
    r = orc.bk_disjoint_check(U, B, C, 0.3)
    assert r.lhs == pytest.approx(r.rhs, rel=1e-13)
    assert r.p_b == pytest.approx(1 - 0.7 ** 2, rel=1e-14)


def test_bk_internal_spans():
    U = Rectangle.from_dims(2, 3)
    E = orc.InternallySpanned(Rectangle(1, 1, 2, 1))
    r = orc.bk_disjoint_check(U, E, E, 0.3)
    assert r.holds
    assert r.lhs <= r.rhs
    # a 2x1 strip is spanned only when both sites are occupied
    assert r.p_b == pytest.approx(0.09, rel=1e-13)
    assert r.lhs == 0.0


def test_bk_rejects_decreasing_event():
    U = Rectangle.from_dims(2, 2)
    empty = orc.PredicateEvent(lambda A: len(A) == 0, "empty")
    with pytest.raises(orc.NonMonotoneEvent):
        orc.bk_disjoint_check(U, empty, orc.SiteOccupied((1, 1)), 0.2)
    with pytest.raises(orc.CapExceeded):
        orc.bk_disjoint_check(Rectangle.from_dims(5, 5), empty, empty, 0.2)


def _random_event(draw, U):
    boxes = st.tuples(st.integers(1, U.width), st.integers(1, U.height),
                      st.integers(1, U.width), st.integers(1, U.height)).map(
        lambda t: Rectangle(min(t[0], t[2]), min(t[1], t[3]), max(t[0], t[2]), max(t[1], t[3])))
    kind = draw(st.sampled_from(["site", "any", "span", "helper", "cross", "threshold"]))
    R = draw(boxes)
    if kind == "site":
        return orc.SiteOccupied((R.x_min, R.y_min))
    if kind == "any":
        return orc.AnyOccupied(R)
    if kind == "span":
        return orc.InternallySpanned(R)
    if kind == "helper":
        S = Rectangle(R.x_min, R.y_min, R.x_min, R.y_min)
        return orc.HelperSpans(S, R)
    if kind == "cross":
        return orc.Crosses(R)
    t = draw(st.integers(1, 3))
    return orc.PredicateEvent(lambda A, R=R, t=t: len(A.restrict(R)) >= t, f"atleast{t}")


@settings(max_examples=40)
@given(st.data(), st.sampled_from([(2, 2), (2, 3), (3, 3), (3, 4)]), st.floats(0.02, 0.9))
def test_bk_random_battery(data, dims, p):
    U = Rectangle.from_dims(*dims)
    B = _random_event(data.draw, U)
    C = _random_event(data.draw, U)
    r = orc.bk_disjoint_check(U, B, C, p)
    assert r.holds, (B, C, r)
    assert 0 <= r.lhs <= min(r.p_b, r.p_c) + 1e-15


def test_event_tables_increasing():
    U = Rectangle.from_dims(3, 3)
    for ev in [orc.InternallySpanned(Rectangle(1, 1, 2, 3)), orc.Crosses(Rectangle(2, 1, 3, 2)),
               orc.HelperSpans(Rectangle(2, 2, 2, 2), Rectangle(1, 1, 3, 3))]:
        assert orc.check_increasing(ev.table(U), 9)


def test_summary_json_fields():
    d = orc.enumerate_spanning((2, 3)).to_dict()
    assert set(d) >= {"dims", "rule", "min_size", "counts"}
    assert d["dims"] == [2, 3]
