"""Seeded point samplers and block approximation of densities.

Every sampler consumes one row of uniforms per point from a
``numpy.random.Generator``, so drawing ``n + k`` points from a stream
reproduces the first ``n`` points exactly. Paired experiments rely on this
prefix property for common-random-number coupling.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from .errors import ConfigError, UsageError
from .geometry import PointSet

MASS_TOL = 1e-9
QUAD_ABS_TOL = 1e-6
SEED_MAX = 2**64


# ------------------------------------------------------------ seeds


@dataclass(frozen=True)
class SeedSpec:
    """Experiment seed plus the child-stream derivation rule.

    The stream for ``(n, trial, *sub)`` is
    ``default_rng(SeedSequence(seed, spawn_key=(n, trial, *sub)))``.
    SeedSequence hashes the entropy and spawn key through a 32-bit-word
    mixing function, so nearby keys give unrelated PCG64 states.
    """

    seed: int

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise UsageError(f"seed must be an integer, got {self.seed!r}")
        if not 0 <= int(self.seed) < SEED_MAX:
            raise UsageError("seed must lie in [0, 2^64)")
        object.__setattr__(self, "seed", int(self.seed))

    def stream(self, n: int, trial: int, *sub: int) -> np.random.Generator:
        key = (int(n), int(trial)) + tuple(int(s) for s in sub)
        if min(key) < 0:
            raise UsageError("stream keys must be nonnegative")
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.stream(0, 0)
    return np.random.default_rng(seed)


# ------------------------------------------------------------ densities


@dataclass(frozen=True, eq=False)
class BlockDensity:
    """Piecewise-constant density on the m^d sub-cubes of [0,1]^d (row-major, first axis slowest)."""

    m: int
    d: int
    weights: np.ndarray

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise UsageError(f"level m must be a positive integer, got {self.m}")
        if int(self.d) != self.d or self.d < 1:
            raise UsageError(f"dimension must be a positive integer, got {self.d}")
        w = np.array(self.weights, dtype=np.float64).ravel()
        if w.size != self.m**self.d:
            raise UsageError(f"need m^d = {self.m ** self.d} weights, got {w.size}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise UsageError("block weights must be finite and nonnegative")
        mass = math.fsum(w) / self.m**self.d
        if abs(mass - 1.0) > MASS_TOL:
            raise UsageError(f"block weights integrate to {mass!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, m: int, d: int) -> BlockDensity:
        return cls(m, d, np.ones(m**d))

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.m**self.d

    def pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        k = np.clip(np.floor(x * self.m).astype(np.int64), 0, self.m - 1)
        return self.weights[np.ravel_multi_index(tuple(k.T), (self.m,) * self.d)]

    def to_text(self) -> str:
        return f"{self.m} {self.d}\n" + "\n".join(repr(float(v)) for v in self.weights) + "\n"

    @classmethod
    def from_text(cls, text: str) -> BlockDensity:
        tokens = text.split()
        try:
            m, d = int(tokens[0]), int(tokens[1])
            w = [float(t) for t in tokens[2:]]
        except (ValueError, IndexError) as exc:
            raise UsageError("block density file must start with 'm d' followed by weights") from exc
        return cls(m, d, np.array(w))

    @classmethod
    def read(cls, path: str | Path) -> BlockDensity:
        return cls.from_text(Path(path).read_text())

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())


@dataclass(frozen=True, eq=False)
class HolderDensity:
    """A probability density on [0,1]^d in the Hoelder class Sigma(beta, K).

    The generic form wraps a vectorised ``pdf`` taking an (N, d) array;
    integrals then go through quadrature.
    """

    pdf: Callable[[np.ndarray], np.ndarray]
    d: int
    beta: float
    K: float
    tag: str = "custom"

    def __post_init__(self):
        if self.d < 1:
            raise UsageError("dimension must be >= 1")
        if not (self.beta > 0 and self.K >= 0):
            raise UsageError("need beta > 0 and K >= 0")


class AffineDensity(HolderDensity):
    """f(x) = 1 + a (x_1 - 1/2) on [0,1]^d, |a| <= 2; Lipschitz with constant |a|."""

    def __init__(self, a: float, d: int = 2):
        a = float(a)
        if not (abs(a) <= 2 and math.isfinite(a)):
            raise UsageError(f"affine density needs |a| <= 2, got {a}")
        if int(d) != d or d < 1:
            raise UsageError("dimension must be a positive integer")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "beta", 1.0)
        object.__setattr__(self, "K", abs(a))
        object.__setattr__(self, "tag", "holder")
        object.__setattr__(self, "pdf", self._pdf)

    def _pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return 1.0 + self.a * (x[:, 0] - 0.5)

    def __repr__(self) -> str:
        return f"AffineDensity(a={self.a}, d={self.d})"

    def inverse_cdf(self, u: np.ndarray) -> np.ndarray:
        """Quantile of the x_1 marginal, F(x) = (a/2) x^2 + (1 - a/2) x."""
        b = 1.0 - self.a / 2
        return 2.0 * u / (b + np.sqrt(b * b + 2.0 * self.a * u))


def holder(a: float, d: int = 2) -> AffineDensity:
    return AffineDensity(a, d)


# ------------------------------------------------------------ samplers


def sample_uniform(n: int, d: int, seed) -> PointSet:
    if n < 0:
        raise UsageError("n must be >= 0")
    return PointSet(_rng(seed).random((int(n), d)), dim=d)


def poisson_count(intensity: float, seed) -> int:
    if not intensity > 0:
        raise UsageError("intensity must be positive")
    return int(_rng(seed).poisson(intensity))


def sample_poisson(intensity: float, d: int, seed, count_seed=None) -> PointSet:
    """Poisson(intensity) uniform points.

    With ``count_seed`` the count comes from a separate stream and the
    points from ``seed``, so the sample is a prefix/extension of
    ``sample_uniform(n, d, seed)``.
    """
    if not intensity > 0:
        raise UsageError("intensity must be positive")
    rng = _rng(seed)
    count = poisson_count(intensity, rng if count_seed is None else count_seed)
    return PointSet(rng.random((count, d)), dim=d)


def sample_block(n: int, phi: BlockDensity, seed) -> PointSet:
    if not isinstance(phi, BlockDensity):
        raise UsageError("sample_block needs a BlockDensity")
    if n < 0:
        raise UsageError("n must be >= 0")
    u = _rng(seed).random((int(n), phi.d + 1))
    cum = np.cumsum(phi.probabilities)
    cell = np.searchsorted(cum, u[:, 0] * cum[-1], side="right")
    cell = np.minimum(cell, phi.m**phi.d - 1)
    k = np.stack(np.unravel_index(cell, (phi.m,) * phi.d), axis=1) if n else np.zeros((0, phi.d))
    return PointSet((k + u[:, 1:]) / phi.m, dim=phi.d)


def sample_holder(n: int, f: HolderDensity, seed) -> PointSet:
    if not isinstance(f, AffineDensity):
        raise UsageError("only the built-in affine family can be sampled directly")
    if n < 0:
        raise UsageError("n must be >= 0")
    u = _rng(seed).random((int(n), f.d))
    u[:, 0] = f.inverse_cdf(u[:, 0])
    return PointSet(u, dim=f.d)


# ------------------------------------------------------------ integrals


def _gl_cell_means(f: HolderDensity, m: int, order: int = 10) -> np.ndarray:
    """Cell averages of f by tensor Gauss-Legendre quadrature."""
    nodes, wts = leggauss(order)
    nodes = (nodes + 1) / 2
    wts = wts / 2
    grids = np.meshgrid(*([nodes] * f.d), indexing="ij")
    local = np.stack([g.ravel() for g in grids], axis=1)
    wprod = np.ones(1)
    for _ in range(f.d):
        wprod = np.outer(wprod, wts).ravel()
    out = np.empty(m**f.d)
    for c, idx in enumerate(np.ndindex(*(m,) * f.d)):
        pts = (np.asarray(idx) + local) / m
        out[c] = float(np.dot(wprod, f.pdf(pts)))
    return out


def approximate_block(f: HolderDensity, m: int) -> BlockDensity:
    """phi_i = m^d * integral of f over cell i."""
    if int(m) != m or m < 1:
        raise UsageError("level m must be a positive integer")
    m = int(m)
    if isinstance(f, AffineDensity):
        k1 = np.arange(m)
        col = 1.0 + f.a * ((k1 + 0.5) / m - 0.5)
        w = np.repeat(col, m ** (f.d - 1))
    else:
        w = _gl_cell_means(f, m)
        w = w / (math.fsum(w) / m**f.d)
    return BlockDensity(m, f.d, w)


def _abs_linear_integral(c0: float, c1: float, lo: float, hi: float) -> float:
    """Integral of |c0 + c1 x| over [lo, hi]."""

    def prim(x):
        return c0 * x + 0.5 * c1 * x * x

    if c1 != 0:
        r = -c0 / c1
        if lo < r < hi:
            return abs(prim(r) - prim(lo)) + abs(prim(hi) - prim(r))
    return abs(prim(hi) - prim(lo))


def l1_gap(f: HolderDensity, phi: BlockDensity) -> float:
    """Integral of |f - phi| over the unit cube."""
    if f.d != phi.d:
        raise UsageError("density dimensions differ")
    m, d = phi.m, phi.d
    if isinstance(f, AffineDensity):
        # f depends on x_1 only, so each cell reduces to a 1-d integral of |linear|
        parts = []
        h = 1.0 / m
        for c, idx in enumerate(np.ndindex(*(m,) * d)):
            lo = idx[0] * h
            c0 = 1.0 - f.a / 2 - phi.weights[c]
            parts.append(h ** (d - 1) * _abs_linear_integral(c0, f.a, lo, lo + h))
        return math.fsum(parts)
    parts = []
    for c, idx in enumerate(np.ndindex(*(m,) * d)):
        ranges = [(k / m, (k + 1) / m) for k in idx]
        val, _ = integrate.nquad(
            lambda *x, w=phi.weights[c]: abs(float(f.pdf(np.array([x]))[0]) - w),
            ranges,
            opts={"epsabs": QUAD_ABS_TOL / m**d, "epsrel": 0},
        )
        parts.append(val)
    return math.fsum(parts)


def lemma_bound(f: HolderDensity, m: int) -> float:
    """d^(beta/2) K m^(-beta): the block-approximation L1 bound."""
    return f.d ** (f.beta / 2) * f.K * m ** (-f.beta)


def density_power_integral(density, q: float) -> float:
    """Integral of density^q over the unit cube, 0 < q <= 1."""
    if not 0 < q <= 1:
        raise UsageError("exponent q must lie in (0, 1]")
    if isinstance(density, BlockDensity):
        return math.fsum(density.weights**q) / density.m**density.d
    if isinstance(density, AffineDensity):
        a = density.a
        if a == 0:
            return 1.0
        return ((1 + a / 2) ** (q + 1) - (1 - a / 2) ** (q + 1)) / (a * (q + 1))
    if isinstance(density, HolderDensity):
        val, _ = integrate.nquad(
            lambda *x: max(float(density.pdf(np.array([x]))[0]), 0.0) ** q,
            [(0.0, 1.0)] * density.d,
            opts={"epsabs": QUAD_ABS_TOL, "epsrel": 0},
        )
        return val
    raise UsageError(f"unsupported density {density!r}")


# ------------------------------------------------------------ sampler specs


@dataclass(frozen=True, eq=False)
class Sampler:
    """A named point distribution on [0,1]^d: uniform, poisson, block or holder."""

    kind: str
    d: int
    density: BlockDensity | HolderDensity | None = None
    label: str = ""

    @property
    def name(self) -> str:
        return self.label or self.kind

    def draw(self, n: int, rng: np.random.Generator, count_rng: np.random.Generator | None = None) -> PointSet:
        if self.kind == "uniform":
            return sample_uniform(n, self.d, rng)
        if self.kind == "poisson":
            return sample_poisson(n, self.d, rng, count_rng)
        if self.kind == "block":
            return sample_block(n, self.density, rng)
        if self.kind == "holder":
            return sample_holder(n, self.density, rng)
        raise UsageError(f"unknown sampler kind {self.kind!r}")


_SPEC = re.compile(r"^\s*(\w+)\s*(?:\(\s*(.*?)\s*\))?\s*$")


def parse_sampler(spec: str, d: int) -> Sampler:
    """Parse ``uniform``, ``poisson``, ``holder(a=1)`` or ``block(path=phi.txt)``."""
    mt = _SPEC.match(spec or "")
    if not mt:
        raise ConfigError(f"bad sampler spec {spec!r}")
    kind, argtext = mt.group(1).lower(), mt.group(2) or ""
    args = {}
    for part in filter(None, (s.strip() for s in argtext.split(","))):
        if "=" not in part:
            raise ConfigError(f"sampler argument {part!r} must be key=value")
        k, v = part.split("=", 1)
        args[k.strip()] = v.strip()
    label = spec.strip().replace(" ", "")
    if kind in ("uniform", "poisson"):
        if args:
            raise ConfigError(f"{kind} takes no arguments")
        return Sampler(kind, d, label=kind)
    if kind == "holder":
        try:
            a = float(args.pop("a"))
        except (KeyError, ValueError) as exc:
            raise ConfigError("holder sampler needs a=<real>") from exc
        if args:
            raise ConfigError(f"unknown holder arguments {sorted(args)}")
        return Sampler("holder", d, AffineDensity(a, d), label=label)
    if kind == "block":
        if "path" in args:
            phi = BlockDensity.read(args.pop("path"))
        elif "weights" in args:
            ws = [float(t) for t in args.pop("weights").split()]
            m = round(len(ws) ** (1.0 / d))
            phi = BlockDensity(m, d, np.array(ws))
        else:
            raise ConfigError("block sampler needs path=<file> or weights=<w1 w2 ...>")
        if args:
            raise ConfigError(f"unknown block arguments {sorted(args)}")
        if phi.d != d:
            raise ConfigError(f"block density has d={phi.d}, experiment has d={d}")
        return Sampler("block", d, phi, label=label)
    raise ConfigError(f"unknown sampler {kind!r}")
