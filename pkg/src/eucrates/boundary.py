"""Boundary-rooted dual functionals L*_MST, L*_MM, L*_TSP.

Travel along the box boundary is free, and any point may attach to it. An
attachment edge costs ``factor * dist(x, boundary)^p``, where ``factor`` is 1
for p >= 1 and 1/2 for 0 < p < 1 (half-price rule). The nearest-face
projection realises the infimum over boundary points, so attachment targets
are implicit and all three duals reduce to finite combinatorial problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import SizeLimitError, UsageError
from .geometry import Box, PointSet, boundary_distances, pairwise_costs
from .solvers import (
    BOUNDARY,
    N_MM_EXACT,
    N_TSPSTAR_EXACT,
    Functional,
    Solution,
    Variant,
    _finish,
    _powered,
    _prepare,
    min_cost_matching,
    mst_parents,
    solve_mst,
    solve_tsp_exact,
)


@dataclass(frozen=True)
class DualConfig:
    boundary_cost_factor: float

    def __post_init__(self):
        if not (0 < self.boundary_cost_factor <= 1):
            raise UsageError("boundary_cost_factor must lie in (0, 1]")

    @classmethod
    def for_power(cls, p: float, override: float | None = None) -> DualConfig:
        if override is not None:
            return cls(float(override))
        return cls(0.5 if p < 1 else 1.0)


def _config(cfg: DualConfig | float | None, p: float) -> DualConfig:
    if cfg is None:
        return DualConfig.for_power(p)
    if isinstance(cfg, DualConfig):
        return cfg
    return DualConfig(float(cfg))


def attachment_costs(ps: PointSet, box: Box, p: float, factor: float) -> np.ndarray:
    return factor * _powered(boundary_distances(ps.coords, box), p)


def _dual_solution(edges, functional, factor, ps, box, p, **meta) -> Solution:
    sol = Solution(0.0, edges, True, functional, Variant.DUAL, boundary_factor=factor, meta=dict(meta))
    _finish(sol, ps, box, p)
    attached = {i for i, j in edges if j == BOUNDARY}
    sol.n_boundary = len(attached)
    costs = sol.edge_costs(ps, box, p)
    is_b = np.array([j == BOUNDARY for _, j in edges], dtype=bool)
    sol.boundary_cost = math.fsum(costs[is_b]) if len(edges) else 0.0
    return sol


def _as_dual(sol: Solution, factor: float) -> Solution:
    sol.variant = Variant.DUAL
    sol.boundary_factor = factor
    sol.meta["plain_optimum"] = True
    return sol


def solve_mst_star(points, box: Box | None = None, p: float = 1.0, cfg: DualConfig | float | None = None) -> Solution:
    """min(plain MST, MST of the graph augmented with one boundary vertex).

    Deleting the boundary vertex from an augmented spanning tree leaves
    components each joined to the boundary by exactly one edge, which is the
    partition form of the dual.
    """
    ps, box = _prepare(points, box, p)
    cfg = _config(cfg, p)
    f = cfg.boundary_cost_factor
    n = len(ps)
    plain = solve_mst(ps, box, p)
    if n == 0:
        return _as_dual(plain, f)
    # attachment length whose p-th power is f * dist^p, so Prim can run on lengths
    att_len = boundary_distances(ps.coords, box) * f ** (1.0 / p)
    parent = mst_parents(ps.coords, att_len)
    edges = []
    for v in range(n):
        u = int(parent[v])
        edges.append((v, BOUNDARY) if u == n else (u, v))
    if parent[n] >= 0:
        edges.append((int(parent[n]), BOUNDARY))
    aug = _dual_solution(edges, Functional.MST, f, ps, box, p)
    if plain.value <= aug.value:
        return _as_dual(plain, f)
    return aug


def solve_mm_star(points, box: Box | None = None, p: float = 1.0, cfg: DualConfig | float | None = None, limit: int = N_MM_EXACT) -> Solution:
    """Each point pairs with another point, attaches to the boundary, or
    (at most one point overall) stays unmatched."""
    ps, box = _prepare(points, box, p)
    cfg = _config(cfg, p)
    f = cfg.boundary_cost_factor
    n = len(ps)
    if n > limit:
        raise SizeLimitError(f"exact MM* limited to n <= {limit} (got {n})")
    if n <= 1:
        return _dual_solution([], Functional.MM, f, ps, box, p)
    w = pairwise_costs(ps.coords, p)
    edges = min_cost_matching(w, attachment_costs(ps, box, p, f))
    return _dual_solution(edges, Functional.MM, f, ps, box, p)


def solve_tsp_star(points, box: Box | None = None, p: float = 1.0, cfg: DualConfig | float | None = None, limit: int = N_TSPSTAR_EXACT) -> Solution:
    """min(plain tour, cheapest cover by boundary-anchored paths).

    A part of the cover is a Hamiltonian path whose two ends each attach to
    the boundary; the return trip along the boundary is free.
    """
    ps, box = _prepare(points, box, p)
    cfg = _config(cfg, p)
    f = cfg.boundary_cost_factor
    n = len(ps)
    if n > limit:
        raise SizeLimitError(f"exact TSP* limited to n <= {limit} (got {n})")
    plain = solve_tsp_exact(ps, box, p, limit=max(limit, n))
    if n == 0:
        return _as_dual(plain, f)
    w = np.ascontiguousarray(pairwise_costs(ps.coords, p))
    att = np.ascontiguousarray(attachment_costs(ps, box, p, f))
    _, _, order = K.anchored_path_cover(w, att)
    edges = []
    paths = []
    for row in order:
        path = [int(v) for v in row if v >= 0]
        paths.append(path)
        edges.append((path[0], BOUNDARY))
        edges.extend((path[k], path[k + 1]) for k in range(len(path) - 1))
        edges.append((path[-1], BOUNDARY))
    cover = _dual_solution(edges, Functional.TSP, f, ps, box, p, paths=paths)
    if plain.value <= cover.value:
        return _as_dual(plain, f)
    return cover


def superadditive_slack(kind, d: int, p: float, m: int = 2) -> float:
    """Additive allowance in the m-split superadditivity check: 0 for MST* and
    MM*, 4 (2 sqrt d)^p m^(d-p) for TSP*."""
    if Functional(kind) is not Functional.TSP:
        return 0.0
    return 4.0 * (2.0 * math.sqrt(d)) ** p * m ** (d - p)


def boundary_diagnostics(sol: Solution) -> tuple[int, float]:
    """(N_B, L_B): attached point count and total attachment cost."""
    if sol.variant is not Variant.DUAL:
        raise UsageError("boundary diagnostics exist only for dual solutions")
    return sol.n_boundary, sol.boundary_cost


__all__ = [
    "DualConfig",
    "attachment_costs",
    "boundary_diagnostics",
    "solve_mm_star",
    "solve_mst_star",
    "solve_tsp_star",
    "superadditive_slack",
]
