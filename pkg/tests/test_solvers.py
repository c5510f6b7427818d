import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eucrates import _kernels as K
from eucrates.errors import SizeLimitError, UsageError
from eucrates.geometry import Box, PointSet, affine_box, affine_image
from eucrates.oracles import mm_oracle, mst_oracle, oracle_value, tsp_oracle
from eucrates.solvers import (
    BOUNDARY,
    Instance,
    PowerParams,
    growth_bound,
    growth_bound_check,
    _matching_blossom,
    mst_parents,
    solve,
    solve_heuristic,
    solve_mm_exact,
    solve_mst,
    solve_tsp_exact,
    solve_value,
)

UNIT = Box.unit(2)


def pts(xs):
    return PointSet(np.asarray(xs, dtype=float))


def test_mst_examples():
    assert solve_mst(pts([[0, 0], [0, 1]]), UNIT, 1).value == 1.0
    assert solve_mst(pts([[0, 0], [0, 0.5], [0, 1]]), UNIT, 2).value == pytest.approx(0.5)
    assert solve_mst(PointSet.empty(2), UNIT, 1).value == 0.0
    assert solve_mst(pts([[0.2, 0.2]]), UNIT, 1).value == 0.0


def test_mm_examples():
    assert solve_mm_exact(pts([[0, 0], [0, 0.3]]), UNIT, 0.5).value == pytest.approx(0.5477226, abs=1e-7)
    sol = solve_mm_exact(pts([[0, 0], [0, 0.1], [0, 0.9]]), UNIT, 1)
    assert sol.value == pytest.approx(0.1)
    assert sorted(map(sorted, sol.edges)) == [[0, 1]]


def test_tsp_examples():
    corners = pts([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert solve_tsp_exact(corners, UNIT, 1).value == pytest.approx(4.0)
    # the closing edge of a two-point tour is paid again
    assert solve_tsp_exact(pts([[0, 0], [0, 1]]), UNIT, 2).value == 2.0
    assert solve_tsp_exact(pts([[0.5, 0.5]]), UNIT, 1).value == 0.0


def test_exact_size_limits():
    x = PointSet(np.random.default_rng(0).random((17, 2)))
    with pytest.raises(SizeLimitError):
        solve_tsp_exact(x, UNIT, 1)
    with pytest.raises(SizeLimitError):
        solve_mm_exact(x, UNIT, 1, limit=16)
    with pytest.raises(UsageError):
        solve_mst(pts([[2, 2]]), UNIT, 1)
    with pytest.raises(UsageError):
        solve_mst(pts([[0.5, 0.5]]), UNIT, 0)


def test_solution_edges_reprice_to_value():
    rng = np.random.default_rng(11)
    for kind in ("mst", "mm", "tsp"):
        x = PointSet(rng.random((9, 2)))
        inst = Instance(x, UNIT, PowerParams(1.3, 2), kind)
        sol = solve(inst)
        assert sol.certified
        assert sol.recompute(x, UNIT, 1.3) == pytest.approx(sol.value, rel=1e-12)
        assert BOUNDARY not in {v for e in sol.edges for v in e}


@pytest.mark.parametrize("seed", range(5))
def test_mst_vs_pruefer_oracle(seed):
    rng = np.random.default_rng(seed)
    x = rng.random((7, 2))
    assert solve_mst(PointSet(x), UNIT, 1.7).value == pytest.approx(mst_oracle(x, 1.7), abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_mm_vs_pairing_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    x = rng.random((10, 2))
    assert solve_mm_exact(PointSet(x), UNIT, 1).value == pytest.approx(mm_oracle(x, 1), abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_tsp_vs_permutation_oracle(seed):
    rng = np.random.default_rng(200 + seed)
    x = rng.random((8, 2))
    assert solve_tsp_exact(PointSet(x), UNIT, 0.7).value == pytest.approx(tsp_oracle(x, 0.7), abs=1e-9)


def test_oracles_on_hand_cases():
    sq = [[0, 0], [1, 0], [1, 1], [0, 1]]
    assert mst_oracle(sq, 1) == pytest.approx(3.0)
    assert mm_oracle(sq, 1) == pytest.approx(2.0)
    assert tsp_oracle(sq, 1) == pytest.approx(4.0)
    assert tsp_oracle([[0, 0], [0, 1]], 1) == pytest.approx(2.0)


def test_blossom_agrees_with_dp():
    rng = np.random.default_rng(5)
    for n in (7, 12, 17):
        w = np.ascontiguousarray(rng.random((n, n)) ** 1.5)
        w = (w + w.T) / 2
        np.fill_diagonal(w, 0)
        dp_val, _ = K.matching_dp(w, np.full(n, np.inf), True)
        blossom_val = math.fsum(w[i, j] for i, j in _matching_blossom(w, None))
        assert blossom_val == pytest.approx(dp_val, abs=1e-12)
        att = rng.random(n) * 0.6
        dp_val, _ = K.matching_dp(w, att, True)
        pairs = _matching_blossom(w, att)
        blossom_val = math.fsum(att[i] if j == BOUNDARY else w[i, j] for i, j in pairs)
        assert blossom_val == pytest.approx(dp_val, abs=1e-12)


def test_blossom_not_worse_than_greedy():
    # 20 points is past the DP limit
    rng = np.random.default_rng(8)
    x = rng.random((20, 2))
    val = solve_mm_exact(PointSet(x), UNIT, 1).value
    heur = solve_heuristic(PointSet(x), UNIT, 1, "mm").value
    assert val <= heur + 1e-12


def test_delaunay_path_matches_prim():
    rng = np.random.default_rng(21)
    x = rng.random((1500, 2))
    fast = mst_parents(x)
    slow = K.prim_parents(np.ascontiguousarray(x), np.zeros(0))

    def total(parent):
        v = np.flatnonzero(parent >= 0)
        return math.fsum(np.linalg.norm(x[v] - x[parent[v]], axis=1))

    assert total(fast) == pytest.approx(total(slow), rel=1e-13)
    att = np.minimum(x, 1 - x).min(axis=1)
    x2 = x.copy()
    x2[:5, 0] = 0.0
    att2 = np.minimum(x2, 1 - x2).min(axis=1)
    for xx, aa in ((x, att), (x2, att2)):
        pf = mst_parents(xx, aa)
        ps = K.prim_parents(np.ascontiguousarray(xx), aa**2)

        def tot(parent):
            s = 0.0
            for v in range(len(xx)):
                u = parent[v]
                s += aa[v] if u == len(xx) else (0.0 if u < 0 else float(np.linalg.norm(xx[v] - xx[u])))
            return s

        assert tot(pf) == pytest.approx(tot(ps), rel=1e-12)


def test_degenerate_large_input_falls_back():
    x = np.column_stack([np.linspace(0, 1, 1100), np.zeros(1100)])
    assert solve_mst(PointSet(x), UNIT, 1).value == pytest.approx(1.0)


def test_heuristic_collinear_tour():
    n = 9
    x = np.column_stack([np.linspace(0.1, 0.9, n), np.full(n, 0.5)])
    perm = np.random.default_rng(1).permutation(n)
    sol = solve_heuristic(PointSet(x[perm]), UNIT, 1, "tsp")
    assert sol.value == pytest.approx(1.6)
    assert not sol.certified
    assert solve_heuristic(PointSet.empty(2), UNIT, 1, "tsp").value == 0.0


@pytest.mark.parametrize("kind", ["mm", "tsp"])
def test_heuristic_never_beats_exact(kind):
    rng = np.random.default_rng(33)
    for _ in range(20):
        x = PointSet(rng.random((int(rng.integers(2, 13)), 2)))
        p = float(rng.uniform(0.5, 2))
        exact = solve_value(x, UNIT, p, kind)
        assert solve_heuristic(x, UNIT, p, kind).value >= exact - 1e-9


def test_growth_bound_examples():
    assert growth_bound_check(PointSet.empty(2), UNIT, 1, "mst")
    assert growth_bound_check(pts([[0.3, 0.3]]), UNIT, 1, "mst")
    assert growth_bound("mst", 0, 2, 1) == pytest.approx(4 * 2 * math.sqrt(2))


def test_brute_oracle_mode():
    x = PointSet(np.random.default_rng(4).random((6, 2)))
    a = solve_value(x, UNIT, 1.2, "tsp", mode="brute_oracle")
    b = solve_value(x, UNIT, 1.2, "tsp")
    assert a == pytest.approx(b, abs=1e-9)


def test_scaling_example():
    rng = np.random.default_rng(9)
    x = PointSet(rng.random((8, 2)))
    y, t = np.array([0.7, -1.2]), 2.5
    v = solve_value(x, UNIT, 1.3, "mst")
    w = solve_value(affine_image(x, y, t), affine_box(UNIT, y, t), 1.3, "mst")
    assert w == pytest.approx(t**1.3 * v, rel=1e-12)


small_sets = st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=0, max_size=7)


@settings(max_examples=60, deadline=None)
@given(small_sets, st.sampled_from([0.5, 1.0, 1.5, 2.2]))
def test_solvers_match_oracles(xs, p):
    x = np.array(xs, dtype=float).reshape(-1, 2)
    for kind in ("mst", "mm", "tsp"):
        assert solve_value(PointSet(x, dim=2), UNIT, p, kind) == pytest.approx(oracle_value(PointSet(x, dim=2), UNIT, p, kind), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(small_sets, st.sampled_from([0.5, 1.0, 1.5]))
def test_permutation_invariance(xs, p):
    x = np.array(xs, dtype=float).reshape(-1, 2)
    perm = np.random.default_rng(len(xs)).permutation(len(x))
    for kind in ("mst", "mm", "tsp"):
        a = solve_value(PointSet(x, dim=2), UNIT, p, kind)
        b = solve_value(PointSet(x[perm], dim=2), UNIT, p, kind)
        assert a == pytest.approx(b, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(small_sets)
def test_functional_ordering(xs):
    # p = 1: MM <= MST <= TSP, and TSP <= 2 MST (shortcut doubling)
    x = np.array(xs, dtype=float).reshape(-1, 2)
    ps = PointSet(x, dim=2)
    mm, mst, tsp = (solve_value(ps, UNIT, 1.0, k) for k in ("mm", "mst", "tsp"))
    assert mm <= mst + 1e-9
    assert mst <= tsp + 1e-9
    assert tsp <= 2 * mst + 1e-9


def test_tour_brute_small():
    x = np.random.default_rng(2).random((6, 2))
    best = min(
        sum(np.linalg.norm(x[o[k]] - x[o[(k + 1) % 6]]) for k in range(6))
        for o in ((0,) + q for q in itertools.permutations(range(1, 6)))
    )
    assert solve_tsp_exact(PointSet(x), UNIT, 1).value == pytest.approx(best, abs=1e-12)
