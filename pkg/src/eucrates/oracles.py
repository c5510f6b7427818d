"""Brute-force reference values for small instances.

These deliberately share no code with the solvers: distances come from
``math.dist``, boundary attachments enumerate all 2d faces explicitly, and
optimal structures are found by exhaustive enumeration (Pruefer sequences,
recursive pairings, permutations, set partitions).
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import SizeLimitError

MST_ORACLE_MAX = 8
MM_ORACLE_MAX = 12
TSP_ORACLE_MAX = 9
DUAL_ORACLE_MAX = 8


def _cost(a, b, p: float) -> float:
    r = math.dist(a, b)
    return r**p if r > 0 else 0.0


def _cost_matrix(pts, p: float) -> list[list[float]]:
    return [[_cost(a, b, p) for b in pts] for a in pts]


# points this close to a face (relative to the box scale) count as on it
ON_FACE = 1e-12


def face_attachments(pt, corner, side: float, p: float, factor: float) -> list[float]:
    """Attachment cost to each of the 2d faces (orthogonal projection)."""
    scale = side + max(abs(c) for c in corner)
    out = []
    for k in range(len(pt)):
        for face in (corner[k], corner[k] + side):
            r = abs(pt[k] - face)
            out.append(factor * r**p if r > ON_FACE * scale else 0.0)
    return out


# ------------------------------------------------------------ MST


@lru_cache(maxsize=None)
def _pruefer_trees(n: int) -> np.ndarray:
    """Edge index arrays of all n^(n-2) labelled trees, shape (T, n-1, 2)."""
    trees = []
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for v in seq:
            degree[v] += 1
        edges = []
        for v in seq:
            leaf = min(u for u in range(n) if degree[u] == 1)
            edges.append((leaf, v))
            degree[leaf] -= 1
            degree[v] -= 1
        u, w = [u for u in range(n) if degree[u] == 1]
        edges.append((u, w))
        trees.append(edges)
    return np.array(trees, dtype=np.int64)


def mst_oracle(pts, p: float) -> float:
    """Minimum over all labelled spanning trees."""
    pts = [tuple(map(float, x)) for x in pts]
    n = len(pts)
    if n <= 1:
        return 0.0
    if n > MST_ORACLE_MAX:
        raise SizeLimitError(f"MST oracle limited to n <= {MST_ORACLE_MAX}")
    c = np.array(_cost_matrix(pts, p))
    trees = _pruefer_trees(n)
    totals = c[trees[:, :, 0], trees[:, :, 1]].sum(axis=1)
    k = int(np.argmin(totals))
    return math.fsum(c[i, j] for i, j in trees[k])


def _kruskal(pts, p: float) -> float:
    n = len(pts)
    parent = list(range(n))

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    total = []
    for cost, i, j in sorted((_cost(pts[i], pts[j], p), i, j) for i in range(n) for j in range(i + 1, n)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            total.append(cost)
    return math.fsum(total)


# ------------------------------------------------------------ MM


def _pairings(items):
    """All ways to pair every element of ``items`` (even length)."""
    if not items:
        yield []
        return
    a = items[0]
    for k in range(1, len(items)):
        rest = items[1:k] + items[k + 1 :]
        for tail in _pairings(rest):
            yield [(a, items[k])] + tail


def mm_oracle(pts, p: float) -> float:
    """Minimum over all matchings with floor(n/2) pairs."""
    pts = [tuple(map(float, x)) for x in pts]
    n = len(pts)
    if n <= 1:
        return 0.0
    if n > MM_ORACLE_MAX:
        raise SizeLimitError(f"MM oracle limited to n <= {MM_ORACLE_MAX}")
    c = _cost_matrix(pts, p)
    best = math.inf
    leave_out = range(n) if n % 2 else [None]
    for skip in leave_out:
        items = [i for i in range(n) if i != skip]
        for pairing in _pairings(items):
            best = min(best, math.fsum(c[i][j] for i, j in pairing))
    return best


# ------------------------------------------------------------ TSP


def tsp_oracle(pts, p: float) -> float:
    """Minimum over all cyclic orders (first vertex fixed)."""
    pts = [tuple(map(float, x)) for x in pts]
    n = len(pts)
    if n <= 1:
        return 0.0
    if n > TSP_ORACLE_MAX:
        raise SizeLimitError(f"TSP oracle limited to n <= {TSP_ORACLE_MAX}")
    c = np.array(_cost_matrix(pts, p))
    perms = np.array(list(itertools.permutations(range(1, n))), dtype=np.int64)
    tours = np.hstack([np.zeros((len(perms), 1), dtype=np.int64), perms])
    nxt = np.roll(tours, -1, axis=1)
    totals = c[tours, nxt].sum(axis=1)
    k = int(np.argmin(totals))
    return math.fsum(c[tours[k, q], nxt[k, q]] for q in range(n))


# ------------------------------------------------------------ duals


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1 :]
        yield [[first]] + part


def mst_star_oracle(pts, corner, side: float, p: float, factor: float) -> float:
    """min(plain MST, min over partitions of sum_j [MST(A_j) + cheapest anchor of A_j]).

    A boundary point of degree k in MST(A_j + b_j) can be split into k
    copies, so single-anchor parts over all partitions cover every option.
    """
    pts = [tuple(map(float, x)) for x in pts]
    n = len(pts)
    if n <= 1:
        return 0.0
    if n > DUAL_ORACLE_MAX:
        raise SizeLimitError(f"dual oracle limited to n <= {DUAL_ORACLE_MAX}")
    anchor = [min(face_attachments(x, corner, side, p, factor)) for x in pts]
    part_cost = {}
    for r in range(1, n + 1):
        for sub in itertools.combinations(range(n), r):
            part_cost[sub] = _kruskal([pts[i] for i in sub], p) + min(anchor[i] for i in sub)
    best = _kruskal(pts, p)
    for partition in _set_partitions(list(range(n))):
        best = min(best, math.fsum(part_cost[tuple(sorted(part))] for part in partition))
    return best


def mm_star_oracle(pts, corner, side: float, p: float, factor: float) -> float:
    """Exhaustive search over pair / attach / (one) unmatched configurations."""
    pts = [tuple(map(float, x)) for x in pts]
    n = len(pts)
    if n > MM_ORACLE_MAX:
        raise SizeLimitError(f"MM* oracle limited to n <= {MM_ORACLE_MAX}")
    c = _cost_matrix(pts, p)
    faces = [face_attachments(x, corner, side, p, factor) for x in pts]
    best = math.inf

    def search(left: tuple, acc: list, skipped: bool):
        nonlocal best
        if not left:
            best = min(best, math.fsum(acc))
            return
        i, rest = left[0], left[1:]
        for a in faces[i]:
            search(rest, acc + [a], skipped)
        if not skipped:
            search(rest, acc, True)
        for k, j in enumerate(rest):
            search(rest[:k] + rest[k + 1 :], acc + [c[i][j]], skipped)

    search(tuple(range(n)), [], False)
    return best


def _best_anchored_path(sub, pts, faces, c) -> float:
    if len(sub) == 1:
        i = sub[0]
        return min(faces[i]) + min(faces[i])
    best = math.inf
    for order in itertools.permutations(sub):
        if order[0] > order[-1]:
            continue
        inner = math.fsum(c[order[k]][order[k + 1]] for k in range(len(order) - 1))
        for fa in faces[order[0]]:
            for fb in faces[order[-1]]:
                best = min(best, inner + fa + fb)
    return best


def tsp_star_oracle(pts, corner, side: float, p: float, factor: float) -> float:
    """min(plain tour, min over partitions x path orders x endpoint faces)."""
    pts = [tuple(map(float, x)) for x in pts]
    n = len(pts)
    if n <= 1:
        return 0.0
    if n > DUAL_ORACLE_MAX:
        raise SizeLimitError(f"dual oracle limited to n <= {DUAL_ORACLE_MAX}")
    c = _cost_matrix(pts, p)
    faces = [face_attachments(x, corner, side, p, factor) for x in pts]
    part_cost = {}
    for r in range(1, n + 1):
        for sub in itertools.combinations(range(n), r):
            part_cost[sub] = _best_anchored_path(sub, pts, faces, c)
    best = tsp_oracle(pts, p)
    for partition in _set_partitions(list(range(n))):
        best = min(best, math.fsum(part_cost[tuple(sorted(part))] for part in partition))
    return best


def oracle_value(points, box, p: float, functional, variant="plain", factor: float | None = None) -> float:
    from .solvers import Functional, Variant

    functional = Functional(functional)
    variant = Variant(variant)
    pts = points.coords.tolist()
    if variant is Variant.PLAIN:
        return {Functional.MST: mst_oracle, Functional.MM: mm_oracle, Functional.TSP: tsp_oracle}[functional](pts, p)
    if factor is None:
        factor = 0.5 if p < 1 else 1.0
    corner = box.corner.tolist()
    fn = {Functional.MST: mst_star_oracle, Functional.MM: mm_star_oracle, Functional.TSP: tsp_star_oracle}[functional]
    return fn(pts, corner, box.side, p, factor)
