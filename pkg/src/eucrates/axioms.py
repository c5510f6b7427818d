"""Randomised checks of the structural properties of the functionals.

Each check draws small random instances, evaluates the exact solvers and
records the worst margin. Instances mix uniform points with duplicated
points and points snapped onto box faces, since both are legal inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import superadditive_slack
from .geometry import Box, PointSet, affine_box, affine_image, sym_diff_count
from .sampling import SeedSpec
from .solvers import (
    Functional,
    growth_bound,
    smoothness_constant,
    solve_value,
    subadditive_constant,
)

ABS_TOL = 1e-9
REL_TOL = 1e-9
FUNCTIONALS = ("mst", "mm", "tsp")
POWERS = (0.5, 1.0, 1.5)


@dataclass
class AxiomResult:
    axiom: str
    functional: str
    variant: str
    p: float
    checks: int
    violations: int
    worst_margin: float
    factor: float | None = None
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.checks > 0

    def line(self) -> str:
        name = self.functional + ("*" if self.variant == "dual" else "")
        fac = f" factor={self.factor:g}" if self.factor is not None else ""
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.note})" if self.note else ""
        return (
            f"{status} {self.axiom:<16} {name:<5} p={self.p:g}{fac} checks={self.checks} "
            f"violations={self.violations} worst_margin={self.worst_margin:.6g}{extra}"
        )


class _Tally:
    def __init__(self):
        self.checks = 0
        self.violations = 0
        self.worst = math.inf

    def add(self, margin: float, tol: float) -> None:
        # margin >= 0 means the inequality holds
        self.checks += 1
        self.worst = min(self.worst, margin)
        if margin < -tol:
            self.violations += 1


def random_box(rng: np.random.Generator, d: int) -> Box:
    return Box(rng.uniform(-5.0, 5.0, d), float(rng.uniform(0.1, 10.0)))


def random_points(rng: np.random.Generator, box: Box, n: int) -> PointSet:
    x = rng.random((n, box.dim))
    if n >= 2 and rng.random() < 0.1:
        x[rng.integers(n)] = x[rng.integers(n)]
    if n >= 1 and rng.random() < 0.1:
        x[rng.integers(n), rng.integers(box.dim)] = float(rng.integers(2))
    return PointSet(box.corner + box.side * x, dim=box.dim)


def random_instance(rng: np.random.Generator, d: int, n_max: int, unit: bool = False) -> tuple[PointSet, Box]:
    box = Box.unit(d) if unit else random_box(rng, d)
    return random_points(rng, box, int(rng.integers(0, n_max + 1))), box


def split_pieces(ps: PointSet, box: Box, m: int = 2) -> list[tuple[PointSet, Box]]:
    """Partition points among the m^d sub-cubes (each point in exactly one)."""
    cells = box.subboxes(m)
    idx = box.cell_index(ps.coords, m) if len(ps) else np.zeros(0, dtype=np.int64)
    return [(PointSet(ps.coords[idx == c], dim=ps.dim), q) for c, q in enumerate(cells)]


# ------------------------------------------------------------ plain axioms


def check_null(kind: str, p: float, d: int, trials: int, rng, variant: str = "plain") -> AxiomResult:
    t = _Tally()
    for _ in range(trials):
        box = random_box(rng, d)
        v = solve_value(PointSet.empty(d), box, p, kind, variant)
        t.add(-abs(v), 0.0)
    return AxiomResult("null", kind, variant, p, t.checks, t.violations, t.worst)


def _base_cases(kind, p, d, trials, rng, n_max, variant="plain", factor=None):
    cases = []
    for _ in range(trials):
        ps, box = random_instance(rng, d, n_max)
        cases.append((ps, box, solve_value(ps, box, p, kind, variant, "exact", factor)))
    return cases


def check_scaling(kind, p, cases, rng, variant="plain", factor=None) -> AxiomResult:
    """L(y + tA, y + tB) = t^p L(A, B) for y, t drawn from [0.1, 10]."""
    t = _Tally()
    d = cases[0][1].dim if cases else 2
    for ps, box, v in cases:
        y = rng.uniform(0.1, 10.0, d)
        s = float(rng.uniform(0.1, 10.0))
        w = solve_value(affine_image(ps, y, s), affine_box(box, y, s), p, kind, variant, "exact", factor)
        target = s**p * v
        t.add(-abs(w - target) / max(abs(target), 1e-300) if target else -abs(w), REL_TOL)
    return AxiomResult("scaling", kind, variant, p, t.checks, t.violations, t.worst, factor)


def check_subadditivity(kind, p, cases) -> AxiomResult:
    """L(A, B) <= sum_i L(A n Q_i, Q_i) + C_sub s^p over the 2^d halves."""
    t = _Tally()
    d = cases[0][1].dim if cases else 2
    c = subadditive_constant(kind, d, p)
    for ps, box, v in cases:
        parts = math.fsum(solve_value(q_ps, q, p, kind) for q_ps, q in split_pieces(ps, box))
        t.add(parts + c * box.side**p - v, ABS_TOL)
    return AxiomResult("subadditivity", kind, "plain", p, t.checks, t.violations, t.worst, note=f"C_sub={c:.6g}")


def check_smoothness(kind, p, cases, rng, max_change: int = 4) -> AxiomResult:
    """|L(A) - L(A')| <= C_smooth |A sym A'|^((d-p)/d) s^p after deleting/inserting <= 4 points."""
    t = _Tally()
    d = cases[0][1].dim if cases else 2
    c = smoothness_constant(kind, d, p)
    for ps, box, v in cases:
        x = ps.coords
        n_del = int(rng.integers(0, min(len(ps), max_change) + 1))
        n_ins = int(rng.integers(0 if n_del else 1, max_change - n_del + 1))
        keep = np.sort(rng.permutation(len(ps))[n_del:])
        extra = box.corner + box.side * rng.random((n_ins, d))
        other = PointSet(np.vstack([x[keep], extra]), dim=d)
        w = solve_value(other, box, p, kind)
        k = sym_diff_count(ps, other)
        bound = c * k ** ((d - p) / d) * box.side**p
        t.add(bound - abs(v - w), ABS_TOL)
    return AxiomResult("smoothness", kind, "plain", p, t.checks, t.violations, t.worst, note=f"C_smooth={c:.6g}")


def check_growth(kind, p, cases) -> AxiomResult:
    """L(A) <= C_growth (|A|^((d-p)/d) v 1) s^p."""
    t = _Tally()
    for ps, box, v in cases:
        t.add(growth_bound(kind, len(ps), box.dim, p, box.side) - v, ABS_TOL)
    return AxiomResult("growth", kind, "plain", p, t.checks, t.violations, t.worst)


# ------------------------------------------------------------ dual properties


def check_domination(kind, p, cases, factor=None) -> AxiomResult:
    """L*(A) <= L(A) on every case (cases carry the plain value)."""
    t = _Tally()
    for ps, box, v in cases:
        w = solve_value(ps, box, p, kind, "dual", "exact", factor)
        t.add(v - w, ABS_TOL)
    return AxiomResult("domination", kind, "dual", p, t.checks, t.violations, t.worst, factor)


def check_superadditivity(kind, p, d, trials, rng, n_max=10, factor=None, slack=None) -> tuple[AxiomResult, int]:
    """L*(A, B) >= sum_i L*(A n Q_i, Q_i) - slack s^p over the 2^d halves.

    Returns the result with the stated slack and the number of zero-slack
    violations, which is informative when the slack is positive.
    """
    if slack is None:
        slack = superadditive_slack(kind, d, p)
    t = _Tally()
    zero_slack = 0
    for _ in range(trials):
        ps, box = random_instance(rng, d, n_max)
        v = solve_value(ps, box, p, kind, "dual", "exact", factor)
        parts = math.fsum(solve_value(q_ps, q, p, kind, "dual", "exact", factor) for q_ps, q in split_pieces(ps, box))
        t.add(v - parts + slack * box.side**p, ABS_TOL)
        if v - parts < -ABS_TOL:
            zero_slack += 1
    if factor is None:
        factor = 0.5 if p < 1 else 1.0
    note = f"slack={slack:.6g} zero_slack_violations={zero_slack}"
    return AxiomResult("superadditivity", kind, "dual", p, t.checks, t.violations, t.worst, factor, note), zero_slack


# ------------------------------------------------------------ suite


def run_suite(
    trials: int = 10_000,
    seed: int = 0,
    d: int = 2,
    powers=POWERS,
    functionals=FUNCTIONALS,
    n_max: int = 12,
    include_dual: bool = True,
) -> list[AxiomResult]:
    """Null, scaling, subadditivity, smoothness and growth for each functional
    and power; optionally domination, dual scaling and superadditivity."""
    ss = SeedSpec(seed)
    out: list[AxiomResult] = []
    for fi, kind in enumerate(functionals):
        Functional(kind)
        for pi, p in enumerate(powers):
            cases = _base_cases(kind, p, d, trials, ss.stream(0, 0, fi, pi), n_max)
            out.append(check_null(kind, p, d, trials, ss.stream(0, 1, fi, pi)))
            out.append(check_scaling(kind, p, cases, ss.stream(0, 2, fi, pi)))
            out.append(check_subadditivity(kind, p, cases))
            out.append(check_smoothness(kind, p, cases, ss.stream(0, 3, fi, pi)))
            out.append(check_growth(kind, p, cases))
    if include_dual:
        out.extend(run_dual_suite(max(trials // 10, 1), seed, d, powers, functionals))
    return out


def run_dual_suite(trials: int, seed: int, d: int = 2, powers=POWERS, functionals=FUNCTIONALS, n_max: int = 8) -> list[AxiomResult]:
    ss = SeedSpec(seed)
    out = []
    for fi, kind in enumerate(functionals):
        for pi, p in enumerate(powers):
            cases = _base_cases(kind, p, d, trials, ss.stream(1, 0, fi, pi), n_max)
            out.append(check_domination(kind, p, cases))
            dual_cases = [(ps, box, solve_value(ps, box, p, kind, "dual")) for ps, box, _ in cases]
            out.append(check_scaling(kind, p, dual_cases, ss.stream(1, 1, fi, pi), variant="dual"))
            res, _ = check_superadditivity(kind, p, d, trials, ss.stream(1, 2, fi, pi), n_max)
            out.append(res)
    return out
