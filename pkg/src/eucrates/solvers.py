"""Exact and heuristic solvers for the plain functionals L_MM, L_MST, L_TSP.

Every solver takes a point set, the enclosing box and the power p, and
returns a :class:`Solution` whose ``value`` is the sum of ``|e|^p`` over the
returned structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, minimum_spanning_tree
from scipy.spatial import Delaunay, QhullError

from . import _kernels as K
from .errors import SizeLimitError, UsageError
from .geometry import Box, PointSet, as_pointset, boundary_distances, pairwise_costs

BOUNDARY = -1
"""Sentinel vertex index for the box boundary in dual solutions."""

N_MM_EXACT = 512
N_TSP_EXACT = 16
N_TSPSTAR_EXACT = 12
MM_DP_LIMIT = 18
DELAUNAY_MIN = 1024
"""Above this size exact matching switches from subset DP to blossom."""


class Functional(str, Enum):
    MM = "mm"
    MST = "mst"
    TSP = "tsp"


class Variant(str, Enum):
    PLAIN = "plain"
    DUAL = "dual"


class Mode(str, Enum):
    EXACT = "exact"
    HEURISTIC = "heuristic"
    BRUTE_ORACLE = "brute_oracle"


@dataclass(frozen=True)
class PowerParams:
    p: float
    d: int

    def __post_init__(self):
        if not (self.p > 0 and math.isfinite(self.p)):
            raise UsageError(f"power p must be positive, got {self.p}")
        if int(self.d) != self.d or self.d < 1:
            raise UsageError(f"dimension must be a positive integer, got {self.d}")

    @property
    def exponent(self) -> float:
        """(d - p) / d, the growth exponent of the functional."""
        return (self.d - self.p) / self.d


@dataclass
class Solution:
    value: float
    edges: list[tuple[int, int]]
    certified: bool
    functional: Functional
    variant: Variant = Variant.PLAIN
    n_boundary: int = 0
    boundary_cost: float = 0.0
    boundary_factor: float = 0.0
    meta: dict = field(default_factory=dict)

    def edge_costs(self, points: PointSet, box: Box, p: float) -> np.ndarray:
        """Cost of each edge; boundary edges are priced at factor * dist^p."""
        if not self.edges:
            return np.zeros(0)
        x = points.coords
        e = np.asarray(self.edges, dtype=np.int64)
        e = np.sort(e, axis=1)[:, ::-1]  # boundary sentinel (-1) ends up in column 1
        bmask = e[:, 1] == BOUNDARY
        out = np.empty(len(e))
        if bmask.any():
            bd = boundary_distances(x[e[bmask, 0]], box, check=False)
            out[bmask] = self.boundary_factor * _powered(bd, p)
        inner = e[~bmask]
        diff = x[inner[:, 0]] - x[inner[:, 1]]
        out[~bmask] = _powered(np.sqrt(np.einsum("ij,ij->i", diff, diff)), p)
        return out

    def recompute(self, points: PointSet, box: Box, p: float) -> float:
        return math.fsum(self.edge_costs(points, box, p))


@dataclass(frozen=True)
class Instance:
    points: PointSet
    box: Box
    params: PowerParams
    functional: Functional
    variant: Variant = Variant.PLAIN
    mode: Mode = Mode.EXACT
    boundary_factor: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "functional", Functional(self.functional))
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.points.dim != self.box.dim or self.params.d != self.box.dim:
            raise UsageError("points, box and params must share the dimension")
        if len(self.points) and not np.all(self.box.contains(self.points.coords)):
            raise UsageError("point lies outside the box")


def _prepare(points, box: Box | None, p: float) -> tuple[PointSet, Box]:
    if not (p > 0 and math.isfinite(p)):
        raise UsageError(f"power p must be positive, got {p}")
    if box is None:
        ps = as_pointset(points)
        box = Box.unit(ps.dim)
    ps = as_pointset(points, dim=box.dim)
    if len(ps) and not np.all(box.contains(ps.coords)):
        raise UsageError("point lies outside the box")
    return ps, box


def _powered(dist: np.ndarray, p: float) -> np.ndarray:
    out = np.zeros_like(dist)
    pos = dist > 0
    out[pos] = dist[pos] ** p
    return out


def _finish(sol: Solution, points: PointSet, box: Box, p: float) -> Solution:
    # value is the compensated sum of the edge costs actually returned
    sol.value = sol.recompute(points, box, p)
    return sol


# ---------------------------------------------------------------- MST


def _delaunay_parents(x: np.ndarray, att: np.ndarray) -> np.ndarray | None:
    """MST parents from the Delaunay graph, or None if the triangulation is degenerate.

    Every edge of the (augmented) MST is a relative-neighbourhood edge, and
    those lie in the Delaunay triangulation, so the sparse MST is exact.
    """
    n = x.shape[0]
    try:
        tri = Delaunay(x)
    except (QhullError, ValueError):
        return None
    if len(tri.coplanar):
        return None
    indptr, nbrs = tri.vertex_neighbor_vertices
    rows = np.repeat(np.arange(n), np.diff(indptr))
    keep = rows < nbrs
    e = np.stack([rows[keep], nbrs[keep]], axis=1)
    w = np.einsum("ij,ij->i", x[e[:, 0]] - x[e[:, 1]], x[e[:, 0]] - x[e[:, 1]])
    nv = n
    if att.size:
        # virtual vertex n; csgraph drops zero weights, so face points get the smallest positive double
        nv = n + 1
        e = np.vstack([e, np.stack([np.arange(n), np.full(n, n)], axis=1)])
        w = np.concatenate([w, np.where(att > 0, att, np.nextafter(0.0, 1.0))])
    if np.any(w[: len(w) - (n if att.size else 0)] == 0):
        return None
    g = coo_matrix((w, (e[:, 0], e[:, 1])), shape=(nv, nv)).tocsr()
    tree = minimum_spanning_tree(g)
    root = n if att.size else 0
    order, pred = breadth_first_order(tree, root, directed=False, return_predecessors=True)
    if len(order) != nv:
        return None
    parent = pred.astype(np.int64)
    parent[root] = -1
    return parent


def mst_parents(coords: np.ndarray, attach_len: np.ndarray | None = None) -> np.ndarray:
    """Parent array of the Euclidean MST (optionally with a virtual root).

    Large planar inputs go through the Delaunay graph; everything else, and
    any degenerate triangulation, uses dense Prim.
    """
    x = np.ascontiguousarray(coords, dtype=np.float64)
    if attach_len is None:
        att = np.zeros(0)
    else:
        att = np.ascontiguousarray(attach_len, dtype=np.float64) ** 2
    if x.shape[1] == 2 and x.shape[0] >= DELAUNAY_MIN:
        parent = _delaunay_parents(x, att)
        if parent is not None:
            return parent
    return K.prim_parents(x, att)


def solve_mst(points, box: Box | None = None, p: float = 1.0) -> Solution:
    """Exact power-weighted MST.

    x -> x^p is increasing, so the Euclidean MST edge set is optimal for
    every p; only the accumulation depends on p.
    """
    ps, box = _prepare(points, box, p)
    n = len(ps)
    if n <= 1:
        return Solution(0.0, [], True, Functional.MST)
    parent = mst_parents(ps.coords)
    edges = [(int(parent[v]), v) for v in range(n) if parent[v] >= 0]
    return _finish(Solution(0.0, edges, True, Functional.MST), ps, box, p)


# ---------------------------------------------------------------- MM


def _matching_blossom(w: np.ndarray, attach: np.ndarray | None) -> list[tuple[int, int]]:
    """Min-cost perfect matching via weighted blossom on a reduction graph.

    Plain (attach is None): complete graph, plus one zero-cost virtual vertex
    when n is odd. Dual: each point i gets an option vertex n+i reached at
    cost attach[i]; option vertices mirror the point-point edges at zero
    cost, and a skip vertex z (cost 0 to every point) with a partner z2
    (cost 0 to every option vertex and to z) allows one unmatched point.
    Returns point-point pairs and (i, BOUNDARY) attachments.
    """
    n = w.shape[0]
    g = nx.Graph()
    big = float(np.max(w)) + (float(np.max(attach)) if attach is not None and n else 0.0) + 1.0

    def add(u, v, cost):
        g.add_edge(u, v, weight=big - cost)

    if attach is None:
        for i in range(n):
            for j in range(i + 1, n):
                add(i, j, w[i, j])
        if n % 2:
            for i in range(n):
                add(i, n, 0.0)
    else:
        z, z2 = 2 * n, 2 * n + 1
        add(z, z2, 0.0)
        for i in range(n):
            add(i, n + i, attach[i])
            add(i, z, 0.0)
            add(n + i, z2, 0.0)
            for j in range(i + 1, n):
                # pairing never beats attaching both ends when w >= a_i + a_j
                if w[i, j] < attach[i] + attach[j]:
                    add(i, j, w[i, j])
                    add(n + i, n + j, 0.0)
    mate = nx.max_weight_matching(g, maxcardinality=True)
    out = []
    for u, v in mate:
        u, v = min(u, v), max(u, v)
        if v < n:
            out.append((u, v))
        elif attach is not None and u < n and v == n + u:
            out.append((u, BOUNDARY))
    return sorted(out)


def min_cost_matching(w: np.ndarray, attach: np.ndarray | None = None) -> list[tuple[int, int]]:
    """Optimal pairs (and boundary attachments when ``attach`` is given).

    Without ``attach`` this is a minimum matching with floor(n/2) pairs. With
    it, each point is paired, attached at ``attach[i]``, or (at most one)
    left unmatched.
    """
    n = w.shape[0]
    if n == 0:
        return []
    if n <= MM_DP_LIMIT:
        att = np.full(n, np.inf) if attach is None else np.ascontiguousarray(attach, dtype=np.float64)
        _, partner = K.matching_dp(np.ascontiguousarray(w), att, True)
        out = []
        for i in range(n):
            j = int(partner[i])
            if j > i:
                out.append((i, j))
            elif j == -1:
                out.append((i, BOUNDARY))
        return out
    return _matching_blossom(w, attach)


def solve_mm_exact(points, box: Box | None = None, p: float = 1.0, limit: int = N_MM_EXACT) -> Solution:
    ps, box = _prepare(points, box, p)
    n = len(ps)
    if n > limit:
        raise SizeLimitError(f"exact MM limited to n <= {limit} (got {n}); use heuristic mode")
    if n <= 1:
        return Solution(0.0, [], True, Functional.MM)
    w = pairwise_costs(ps.coords, p)
    edges = min_cost_matching(w)
    return _finish(Solution(0.0, edges, True, Functional.MM), ps, box, p)


# ---------------------------------------------------------------- TSP


def tour_edges(order) -> list[tuple[int, int]]:
    order = [int(v) for v in order]
    return [(order[k], order[(k + 1) % len(order)]) for k in range(len(order))]


def solve_tsp_exact(points, box: Box | None = None, p: float = 1.0, limit: int = N_TSP_EXACT) -> Solution:
    """Exact closed tour by subset DP.

    The cyclic sum closes the tour with pi(n+1) = pi(1); for n = 2 the single
    edge is therefore paid twice.
    """
    ps, box = _prepare(points, box, p)
    n = len(ps)
    if n > limit:
        raise SizeLimitError(f"exact TSP limited to n <= {limit} (got {n}); use heuristic mode")
    if n <= 1:
        return Solution(0.0, [], True, Functional.TSP)
    if n == 2:
        return _finish(Solution(0.0, [(0, 1), (1, 0)], True, Functional.TSP), ps, box, p)
    w = np.ascontiguousarray(pairwise_costs(ps.coords, p))
    _, order = K.held_karp(w)
    sol = Solution(0.0, tour_edges(order), True, Functional.TSP, meta={"tour": [int(v) for v in order]})
    return _finish(sol, ps, box, p)


# ---------------------------------------------------------------- heuristics


def solve_heuristic(points, box: Box | None = None, p: float = 1.0, kind: str = "tsp", max_passes: int = 1000) -> Solution:
    """Non-certified solutions for sizes beyond the exact solvers.

    ``kind`` is ``"mm"`` (greedy matching + pair swaps), ``"tsp"`` (nearest
    neighbour tour + 2-opt) or ``"mst"`` (always exact).
    """
    ps, box = _prepare(points, box, p)
    kind = Functional(str(kind).lower().split("-")[0])
    n = len(ps)
    x = np.ascontiguousarray(ps.coords)
    if kind is Functional.MST:
        return solve_mst(ps, box, p)
    if kind is Functional.MM:
        if n <= 1:
            return Solution(0.0, [], False, Functional.MM)
        mate = K.greedy_matching(x, float(p), max_passes)
        edges = [(i, int(mate[i])) for i in range(n) if mate[i] > i]
        return _finish(Solution(0.0, edges, False, Functional.MM), ps, box, p)
    if n <= 1:
        return Solution(0.0, [], False, Functional.TSP)
    if n == 2:
        return _finish(Solution(0.0, [(0, 1), (1, 0)], False, Functional.TSP), ps, box, p)
    tour = K.nearest_neighbor_tour(x, float(p))
    tour = K.two_opt(x, tour, float(p), max_passes)
    sol = Solution(0.0, tour_edges(tour), False, Functional.TSP, meta={"tour": [int(v) for v in tour]})
    return _finish(sol, ps, box, p)


# ---------------------------------------------------------------- growth bound


def growth_constant(kind, d: int, p: float) -> float:
    """Loose constant for the bound L(A) <= C (|A|^{(d-p)/d} v 1) s^p."""
    c = 4.0 * (2.0 * math.sqrt(d)) ** p
    return 2.0 * c if Functional(kind) is Functional.TSP else c


def subadditive_constant(kind, d: int, p: float) -> float:
    """Additive error allowed in the m = 2 subadditivity check."""
    return 2.0**d * (2.0 * math.sqrt(d)) ** p


def smoothness_constant(kind, d: int, p: float) -> float:
    return 8.0**d * d ** (p / 2.0)


def growth_bound(kind, n: int, d: int, p: float, side: float = 1.0) -> float:
    return growth_constant(kind, d, p) * max(n ** ((d - p) / d) if n > 0 else 0.0, 1.0) * side**p


def growth_bound_check(points, box: Box | None = None, p: float = 1.0, kind="mst") -> bool:
    ps, box = _prepare(points, box, p)
    value = solve(Instance(ps, box, PowerParams(p, box.dim), Functional(kind))).value
    return value <= growth_bound(kind, len(ps), box.dim, p, box.side)


# ---------------------------------------------------------------- dispatch


def solve(inst: Instance) -> Solution:
    """Solve an :class:`Instance` according to its functional, variant and mode."""
    from . import boundary, oracles

    p = inst.params.p
    if inst.mode is Mode.BRUTE_ORACLE:
        value = oracles.oracle_value(inst.points, inst.box, p, inst.functional, inst.variant, inst.boundary_factor)
        return Solution(value, [], True, inst.functional, inst.variant, meta={"oracle": True})
    if inst.variant is Variant.DUAL:
        if inst.mode is Mode.HEURISTIC and inst.functional is not Functional.MST:
            raise UsageError("dual variants are exact-only for mm and tsp")
        cfg = boundary.DualConfig.for_power(p, inst.boundary_factor)
        fn = {Functional.MST: boundary.solve_mst_star, Functional.MM: boundary.solve_mm_star, Functional.TSP: boundary.solve_tsp_star}[inst.functional]
        return fn(inst.points, inst.box, p, cfg)
    if inst.mode is Mode.HEURISTIC:
        return solve_heuristic(inst.points, inst.box, p, inst.functional.value)
    fn = {Functional.MST: solve_mst, Functional.MM: solve_mm_exact, Functional.TSP: solve_tsp_exact}[inst.functional]
    return fn(inst.points, inst.box, p)


def solve_value(points, box: Box, p: float, functional, variant="plain", mode="exact", boundary_factor=None) -> float:
    ps = as_pointset(points, dim=box.dim)
    inst = Instance(ps, box, PowerParams(p, box.dim), Functional(functional), Variant(variant), Mode(mode), boundary_factor)
    return solve(inst).value
