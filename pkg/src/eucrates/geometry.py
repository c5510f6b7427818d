"""Points, boxes and power-weighted edge costs.

A point set is stored as an ``(n, d)`` float64 array wrapped in
:class:`PointSet`; a box is the cube ``corner + [0, side]^d``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import UsageError

INSIDE_TOL = 1e-12
FACE_SNAP = 1e-12


def _as_point(a, name: str = "point") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise UsageError(f"{name} must be a non-empty coordinate vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise UsageError(f"{name} has non-finite coordinates")
    return arr


class PointSet:
    """Immutable ordered multiset of points in R^d."""

    __slots__ = ("_coords",)

    def __init__(self, coords, dim: int | None = None):
        arr = np.array(coords, dtype=np.float64, copy=True)
        if arr.size == 0:
            if dim is None:
                dim = arr.shape[1] if arr.ndim == 2 else None
            if dim is None or dim < 1:
                raise UsageError("empty point set needs an explicit dimension")
            arr = arr.reshape(0, dim)
        if arr.ndim == 1 and dim is not None and dim >= 1:
            arr = arr.reshape(-1, dim)
        if arr.ndim != 2:
            raise UsageError(f"point coordinates must form an (n, d) array, got shape {arr.shape}")
        if dim is not None and arr.shape[1] != dim:
            raise UsageError(f"expected dimension {dim}, got {arr.shape[1]}")
        if arr.shape[1] < 1:
            raise UsageError("dimension must be >= 1")
        if not np.all(np.isfinite(arr)):
            raise UsageError("point coordinates must be finite")
        arr.setflags(write=False)
        self._coords = arr

    @classmethod
    def empty(cls, dim: int) -> PointSet:
        return cls(np.zeros((0, dim)), dim=dim)

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @property
    def dim(self) -> int:
        return self._coords.shape[1]

    def __len__(self) -> int:
        return self._coords.shape[0]

    def __iter__(self):
        return iter(self._coords)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return self._coords[idx]
        return PointSet(self._coords[idx], dim=self.dim)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return self._coords.shape == other._coords.shape and bool(np.array_equal(self._coords, other._coords))

    def __hash__(self):
        return hash((self._coords.shape, self._coords.tobytes()))

    def __repr__(self) -> str:
        return f"PointSet(n={len(self)}, d={self.dim})"

    def concat(self, other: PointSet) -> PointSet:
        if other.dim != self.dim:
            raise UsageError("dimension mismatch")
        return PointSet(np.vstack([self._coords, other._coords]), dim=self.dim)


@dataclass(frozen=True, eq=False)
class Box:
    """The cube prod_i [corner_i, corner_i + side]."""

    corner: np.ndarray
    side: float

    def __post_init__(self):
        corner = _as_point(self.corner, "box corner").copy()
        corner.setflags(write=False)
        object.__setattr__(self, "corner", corner)
        side = float(self.side)
        if not (side > 0 and np.isfinite(side)):
            raise UsageError(f"box side must be positive, got {self.side}")
        object.__setattr__(self, "side", side)

    @classmethod
    def unit(cls, dim: int) -> Box:
        return cls(np.zeros(dim), 1.0)

    @property
    def dim(self) -> int:
        return self.corner.shape[0]

    @property
    def upper(self) -> np.ndarray:
        return self.corner + self.side

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        return self.side == other.side and bool(np.array_equal(self.corner, other.corner))

    def __repr__(self) -> str:
        return f"Box(corner={self.corner.tolist()}, side={self.side})"

    def contains(self, coords: np.ndarray, tol: float = INSIDE_TOL) -> np.ndarray:
        coords = np.atleast_2d(coords)
        return np.all((coords >= self.corner - tol) & (coords <= self.upper + tol), axis=1)

    def subboxes(self, m: int) -> list[Box]:
        """The m^d congruent sub-cubes, row-major with the first axis slowest."""
        if m < 1:
            raise UsageError("m must be >= 1")
        h = self.side / m
        out = []
        for idx in np.ndindex(*(m,) * self.dim):
            out.append(Box(self.corner + h * np.asarray(idx, dtype=np.float64), h))
        return out

    def cell_index(self, coords: np.ndarray, m: int) -> np.ndarray:
        """Row-major index of the sub-cube holding each point (upper faces close the last cell)."""
        coords = np.atleast_2d(coords)
        k = np.floor((coords - self.corner) / (self.side / m)).astype(np.int64)
        k = np.clip(k, 0, m - 1)
        return np.ravel_multi_index(tuple(k.T), (m,) * self.dim)


def edge_cost(a, b, p: float) -> float:
    a = _as_point(a, "a")
    b = _as_point(b, "b")
    if a.shape != b.shape:
        raise UsageError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if not p > 0:
        raise UsageError(f"power p must be positive, got {p}")
    dist = float(np.sqrt(np.sum((a - b) ** 2)))
    return dist**p if dist > 0 else 0.0


def pairwise_costs(coords: np.ndarray, p: float) -> np.ndarray:
    """Dense matrix of |x_i - x_j|^p (zero diagonal)."""
    coords = np.asarray(coords, dtype=np.float64)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return dist**p


def boundary_distances(coords: np.ndarray, box: Box, check: bool = True) -> np.ndarray:
    """Distance from each point to the nearest face of ``box``."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    if coords.shape[0] == 0:
        return np.zeros(0)
    if coords.shape[1] != box.dim:
        raise UsageError(f"dimension mismatch: points {coords.shape[1]} vs box {box.dim}")
    if check and not np.all(box.contains(coords)):
        raise UsageError("point lies outside the box")
    lo = coords - box.corner
    hi = box.upper - coords
    dist = np.minimum(lo, hi).min(axis=1)
    # rounding-level distances are on the face; dist^p with p < 1 would amplify them
    snap = FACE_SNAP * (box.side + float(np.max(np.abs(box.corner))))
    dist[dist <= snap] = 0.0
    return np.clip(dist, 0.0, box.side / 2)


def boundary_dist(a, box: Box) -> float:
    a = _as_point(a)
    return float(boundary_distances(a[None, :], box)[0])


def affine_image(ps: PointSet, y, t: float) -> PointSet:
    """Map every point x to y + t*x, preserving order."""
    y = _as_point(y, "y")
    if not t > 0:
        raise UsageError(f"scale t must be positive, got {t}")
    if y.shape[0] != ps.dim:
        raise UsageError("dimension mismatch")
    return PointSet(y + t * ps.coords, dim=ps.dim)


def affine_box(box: Box, y, t: float) -> Box:
    y = _as_point(y, "y")
    if not t > 0:
        raise UsageError(f"scale t must be positive, got {t}")
    return Box(y + t * box.corner, t * box.side)


def sym_diff_count(a: PointSet, b: PointSet) -> int:
    """Size of the multiset symmetric difference, comparing exact coordinates."""
    if len(a) and len(b) and a.dim != b.dim:
        raise UsageError("dimension mismatch")
    ca = Counter(map(tuple, a.coords.tolist()))
    cb = Counter(map(tuple, b.coords.tolist()))
    return sum(((ca - cb) + (cb - ca)).values())


def read_points(path: str | Path) -> PointSet:
    """Parse the ``d n`` header + n coordinate lines format."""
    text = Path(path).read_text()
    return parse_points(text)


def parse_points(text: str) -> PointSet:
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise UsageError("point file is empty")
    try:
        d, n = int(lines[0][0]), int(lines[0][1])
    except (ValueError, IndexError) as exc:
        raise UsageError("point file header must be 'd n'") from exc
    rows = lines[1:]
    if len(rows) != n:
        raise UsageError(f"header declares {n} points, found {len(rows)}")
    try:
        coords = [[float(v) for v in row] for row in rows]
    except ValueError as exc:
        raise UsageError(f"bad coordinate: {exc}") from exc
    if any(len(row) != d for row in coords):
        raise UsageError(f"every point needs exactly {d} coordinates")
    return PointSet(np.array(coords, dtype=np.float64).reshape(n, d), dim=d)


def format_points(ps: PointSet) -> str:
    out = [f"{ps.dim} {len(ps)}"]
    out.extend(" ".join(repr(float(v)) for v in row) for row in ps.coords)
    return "\n".join(out) + "\n"


def write_points(ps: PointSet, path: str | Path) -> None:
    Path(path).write_text(format_points(ps))


def as_pointset(points: PointSet | Sequence[Sequence[float]] | np.ndarray | Iterable, dim: int | None = None) -> PointSet:
    if isinstance(points, PointSet):
        if dim is not None and points.dim != dim:
            raise UsageError(f"expected dimension {dim}, got {points.dim}")
        return points
    return PointSet(np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=np.float64), dim=dim)
